#include "fedad/secure_agg.hpp"

#include <cmath>
#include <cstring>

#include "fedad/errors.hpp"

namespace fedad::he {

namespace {

using u64 = std::uint64_t;
using u128 = unsigned __int128;

u64 mod_mul(u64 a, u64 b, u64 q) { return static_cast<u64>(static_cast<u128>(a) * b % q); }

u64 mod_add(u64 a, u64 b, u64 q) {
    const u64 s = a + b; // a, b < q <= 2^61, no overflow
    return s >= q ? s - q : s;
}

u64 mod_sub(u64 a, u64 b, u64 q) { return a >= b ? a - b : a + q - b; }

u64 to_mod(std::int64_t x, u64 q) {
    return x >= 0 ? static_cast<u64>(x) % q : q - (static_cast<u64>(-x) % q);
}

std::int64_t from_mod(u64 x, u64 q) {
    return x <= q / 2 ? static_cast<std::int64_t>(x) : -static_cast<std::int64_t>(q - x);
}

// public mask row: secret_dim pseudo-random elements per plaintext coordinate
u64 mask_dot_secret(u64 seed, std::size_t coord, std::span<const u64> secret, u64 q) {
    u64 stream = mix(seed, static_cast<u64>(coord));
    u64 acc = 0;
    for (u64 s : secret) {
        const u64 a = splitmix64(stream) % q;
        acc = mod_add(acc, mod_mul(a, s, q), q);
    }
    return acc;
}

void append_u64(std::vector<std::uint8_t>& out, u64 v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

u64 read_u64(std::span<const std::uint8_t> bytes, std::size_t& pos) {
    if (pos + 8 > bytes.size()) throw DataError("ciphertext blob truncated");
    u64 v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<u64>(bytes[pos + static_cast<std::size_t>(i)]) << (8 * i);
    pos += 8;
    return v;
}

constexpr std::uint8_t kSchemeVersion = 1;

} // namespace

void validate_params(const SchemeParams& params) {
    if (params.secret_dim < 1) throw ConfigError("he: secret_dim must be >= 1");
    if (params.modulus < (1ULL << 32)) throw ConfigError("he: modulus too small");
    if (params.scale < 2.0 || !std::isfinite(params.scale)) throw ConfigError("he: bad scale");
    if (params.noise_bound < 0) throw ConfigError("he: negative noise bound");
    // two levels of headroom: |value| * scale^2 must stay far below q/2
    if (params.scale * params.scale >= static_cast<double>(params.modulus) / 1024.0) {
        throw ConfigError("he: scale too large for the modulus");
    }
}

HEKeys keygen(const SchemeParams& params, Rng& rng) {
    validate_params(params);
    HEKeys keys;
    keys.params = params;
    keys.key_id = rng.next_u64();
    keys.secret.s_.resize(static_cast<std::size_t>(params.secret_dim));
    for (auto& s : keys.secret.s_) s = rng.next_u64() % params.modulus;
    return keys;
}

CipherVector encrypt(std::span<const double> v, const HEKeys& keys, Rng& rng) {
    validate_params(keys.params);
    const u64 q = keys.params.modulus;
    CipherVector c;
    c.params_ = keys.params;
    c.key_id_ = keys.key_id;
    c.scale_ = keys.params.scale;
    c.terms_.push_back({rng.next_u64(), 1});
    c.body_.resize(v.size());
    const int nb = keys.params.noise_bound;
    for (std::size_t j = 0; j < v.size(); ++j) {
        if (!std::isfinite(v[j])) throw NumericError("he: cannot encrypt non-finite value");
        const auto encoded = static_cast<std::int64_t>(std::llround(v[j] * keys.params.scale));
        const std::int64_t noise = nb > 0 ? rng.uniform_int(2 * nb + 1) - nb : 0;
        const u64 mask = mask_dot_secret(c.terms_[0].seed, j, keys.secret.s_, q);
        c.body_[j] = mod_add(mask, to_mod(encoded + noise, q), q);
    }
    return c;
}

std::vector<double> decrypt(const CipherVector& c, const HEKeys& keys) {
    if (c.key_id_ != keys.key_id) throw DataError("he: ciphertext does not match this key");
    if (c.scale_ <= 0.0) throw DataError("he: uninitialized ciphertext");
    const u64 q = c.params_.modulus;
    std::vector<double> out(c.body_.size());
    for (std::size_t j = 0; j < c.body_.size(); ++j) {
        u64 acc = c.body_[j];
        for (const auto& term : c.terms_) {
            const u64 mask = mask_dot_secret(term.seed, j, keys.secret.s_, q);
            acc = mod_sub(acc, mod_mul(term.coeff, mask, q), q);
        }
        out[j] = static_cast<double>(from_mod(acc, q)) / c.scale_;
    }
    return out;
}

CipherVector he_add(const CipherVector& a, const CipherVector& b) {
    if (a.key_id_ != b.key_id_) throw DataError("he_add: mixed key material");
    if (a.body_.size() != b.body_.size()) throw ShapeError("he_add: length mismatch");
    if (a.scale_ != b.scale_) throw DataError("he_add: scale mismatch");
    const u64 q = a.params_.modulus;
    CipherVector out = a;
    out.terms_.insert(out.terms_.end(), b.terms_.begin(), b.terms_.end());
    for (std::size_t j = 0; j < out.body_.size(); ++j) {
        out.body_[j] = mod_add(out.body_[j], b.body_[j], q);
    }
    return out;
}

CipherVector he_scale(const CipherVector& c, double s) {
    if (!std::isfinite(s)) throw NumericError("he_scale: non-finite scalar");
    if (c.scale_ <= 0.0) throw DataError("he_scale: uninitialized ciphertext");
    const double base = c.params_.scale;
    if (c.scale_ >= base * base) {
        throw NumericError("he_scale: scale budget exceeded (one multiplicative level supported)");
    }
    const u64 q = c.params_.modulus;
    const auto m = static_cast<std::int64_t>(std::llround(s * base));
    const u64 m_mod = to_mod(m, q);
    CipherVector out = c;
    out.scale_ = c.scale_ * base;
    for (auto& term : out.terms_) term.coeff = mod_mul(term.coeff, m_mod, q);
    for (auto& b : out.body_) b = mod_mul(b, m_mod, q);
    return out;
}

CipherVector secure_fedavg(std::span<const std::pair<CipherVector, long>> updates) {
    if (updates.empty()) throw DataError("secure_fedavg: no updates");
    double total = 0.0;
    for (const auto& [c, n] : updates) {
        if (n <= 0) throw DataError("secure_fedavg: sample counts must be positive");
        total += static_cast<double>(n);
    }
    CipherVector acc;
    bool first = true;
    for (const auto& [c, n] : updates) {
        CipherVector scaled = he_scale(c, static_cast<double>(n) / total);
        if (first) {
            acc = std::move(scaled);
            first = false;
        } else {
            acc = he_add(acc, scaled);
        }
    }
    return acc;
}

std::vector<std::uint8_t> CipherVector::to_bytes() const {
    std::vector<std::uint8_t> out;
    out.reserve(1 + 8 * (6 + 2 * terms_.size() + body_.size()));
    out.push_back(kSchemeVersion);
    append_u64(out, key_id_);
    append_u64(out, params_.modulus);
    append_u64(out, static_cast<u64>(params_.secret_dim));
    u64 scale_bits, base_bits;
    std::memcpy(&scale_bits, &scale_, 8);
    const double base = params_.scale;
    std::memcpy(&base_bits, &base, 8);
    append_u64(out, base_bits);
    append_u64(out, scale_bits);
    append_u64(out, static_cast<u64>(terms_.size()));
    append_u64(out, static_cast<u64>(body_.size()));
    for (const auto& t : terms_) {
        append_u64(out, t.seed);
        append_u64(out, t.coeff);
    }
    for (u64 b : body_) append_u64(out, b);
    return out;
}

CipherVector CipherVector::from_bytes(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) throw DataError("ciphertext blob is empty");
    if (bytes[0] != kSchemeVersion) {
        throw DataError("unsupported ciphertext version " + std::to_string(bytes[0]));
    }
    std::size_t pos = 1;
    CipherVector c;
    c.key_id_ = read_u64(bytes, pos);
    c.params_.modulus = read_u64(bytes, pos);
    c.params_.secret_dim = static_cast<int>(read_u64(bytes, pos));
    const u64 base_bits = read_u64(bytes, pos);
    const u64 scale_bits = read_u64(bytes, pos);
    std::memcpy(&c.params_.scale, &base_bits, 8);
    std::memcpy(&c.scale_, &scale_bits, 8);
    const u64 n_terms = read_u64(bytes, pos);
    const u64 n_body = read_u64(bytes, pos);
    c.terms_.resize(n_terms);
    for (auto& t : c.terms_) {
        t.seed = read_u64(bytes, pos);
        t.coeff = read_u64(bytes, pos);
    }
    c.body_.resize(n_body);
    for (auto& b : c.body_) b = read_u64(bytes, pos);
    if (pos != bytes.size()) throw DataError("ciphertext blob has trailing bytes");
    return c;
}

} // namespace fedad::he
