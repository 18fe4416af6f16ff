#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedad/rng.hpp"

namespace fedad::he {

// Approximate additively homomorphic encryption over real vectors: a
// symmetric LWE-style scheme with fixed-point encoding. Supported algebra is
// ciphertext + ciphertext and ciphertext * plaintext scalar, which is all
// blind weighted averaging needs. One multiplicative level at the default
// parameters; per-coordinate decryption error stays well under 1e-3 for
// values in [-10, 10].
struct SchemeParams {
    int secret_dim = 512;
    std::uint64_t modulus = (1ULL << 61) - 1; // Mersenne prime 2^61 - 1
    double scale = 1048576.0;                 // 2^20 fixed-point scale
    int noise_bound = 8;                      // uniform noise in [-bound, bound]
};

void validate_params(const SchemeParams& params);

class CipherVector;
struct HEKeys;

HEKeys keygen(const SchemeParams& params, Rng& rng);
CipherVector encrypt(std::span<const double> v, const HEKeys& keys, Rng& rng);
std::vector<double> decrypt(const CipherVector& c, const HEKeys& keys);

// Client-side material; nothing in the server-facing API accepts it.
class SecretKey {
public:
    SecretKey() = default;

private:
    std::vector<std::uint64_t> s_;
    friend HEKeys keygen(const SchemeParams&, Rng&);
    friend CipherVector encrypt(std::span<const double>, const HEKeys&, Rng&);
    friend std::vector<double> decrypt(const CipherVector&, const HEKeys&);
};

struct HEKeys {
    SchemeParams params;
    std::uint64_t key_id = 0; // public fingerprint, embedded in ciphertexts
    SecretKey secret;
};

class CipherVector {
public:
    CipherVector() = default;

    std::size_t plaintext_length() const { return body_.size(); }
    double scale() const { return scale_; }
    std::uint64_t key_id() const { return key_id_; }
    const SchemeParams& params() const { return params_; }

    std::vector<std::uint8_t> to_bytes() const;
    static CipherVector from_bytes(std::span<const std::uint8_t> bytes);

private:
    struct MaskTerm {
        std::uint64_t seed;  // regenerates the public mask row stream
        std::uint64_t coeff; // accumulated plaintext coefficient mod q
    };

    SchemeParams params_;
    std::uint64_t key_id_ = 0;
    double scale_ = 0.0;
    std::vector<MaskTerm> terms_;
    std::vector<std::uint64_t> body_;

    friend CipherVector encrypt(std::span<const double>, const HEKeys&, Rng&);
    friend std::vector<double> decrypt(const CipherVector&, const HEKeys&);
    friend CipherVector he_add(const CipherVector&, const CipherVector&);
    friend CipherVector he_scale(const CipherVector&, double);
};

// requires equal lengths, matching keys and matching scales
CipherVector he_add(const CipherVector& a, const CipherVector& b);

// multiplies by round(s * scale); raises the ciphertext scale one level
CipherVector he_scale(const CipherVector& c, double s);

// Blind weighted average: sum_k he_scale(c_k, n_k / sum n). Takes only
// ciphertexts and public counts; no key material crosses this interface.
CipherVector secure_fedavg(std::span<const std::pair<CipherVector, long>> updates);

} // namespace fedad::he
