#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <type_traits>

#include "fedad/aggregators.hpp"
#include "fedad/secure_agg.hpp"

using namespace fedad;
using namespace fedad::he;

namespace {

constexpr double kEps = 1e-3; // per-coordinate decryption error contract

std::vector<double> random_vector(Rng& rng, std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// the server-facing surface accepts no key material
static_assert(!std::is_invocable_v<decltype(&he_add), const CipherVector&, const SecretKey&>);
static_assert(!std::is_invocable_v<decltype(&he_scale), const CipherVector&, const SecretKey&>);
static_assert(
    std::is_invocable_v<decltype(&secure_fedavg), std::span<const std::pair<CipherVector, long>>>);
static_assert(!std::is_invocable_v<decltype(&secure_fedavg),
                                   std::span<const std::pair<CipherVector, long>>, const HEKeys&>);
// decryption, by contrast, demands the full keys
static_assert(!std::is_invocable_v<decltype(&decrypt), const CipherVector&>);

} // namespace

TEST_CASE("keygen: deterministic under a test seed, smoke usable") {
    Rng rng1(100), rng2(100);
    const HEKeys a = keygen({}, rng1);
    const HEKeys b = keygen({}, rng2);
    CHECK(a.key_id == b.key_id);

    Rng enc(1);
    const std::vector<double> v = {1.0, -2.0, 3.0};
    const CipherVector c = encrypt(v, a, enc);
    const auto back = decrypt(c, a);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(back[i] - v[i]) <= kEps);

    SchemeParams bad;
    bad.secret_dim = 0;
    CHECK_THROWS_AS(keygen(bad, rng1), ConfigError);
}

TEST_CASE("keys from different keygens do not interoperate") {
    Rng r1(1), r2(2), enc(3);
    const HEKeys a = keygen({}, r1);
    const HEKeys b = keygen({}, r2);
    const CipherVector c = encrypt(std::vector<double>{1.0}, a, enc);
    CHECK_THROWS_AS(decrypt(c, b), DataError);
    const CipherVector cb = encrypt(std::vector<double>{1.0}, b, enc);
    CHECK_THROWS_AS(he_add(c, cb), DataError);
}

TEST_CASE("encrypt/decrypt: round-trip within the error contract") {
    Rng key_rng(7);
    const HEKeys keys = keygen({}, key_rng);
    Rng rng(8);

    const std::vector<double> zero(50, 0.0);
    Rng enc(9);
    auto back = decrypt(encrypt(zero, keys, enc), keys);
    for (double v : back) CHECK(std::abs(v) <= kEps);

    const auto v = random_vector(rng, 1000, -1.0, 1.0);
    back = decrypt(encrypt(v, keys, enc), keys);
    REQUIRE(back.size() == v.size());
    CHECK(max_abs_diff(back, v) <= kEps);

    const auto wide = random_vector(rng, 200, -10.0, 10.0);
    back = decrypt(encrypt(wide, keys, enc), keys);
    CHECK(max_abs_diff(back, wide) <= kEps);

    CHECK_THROWS_AS(encrypt(std::vector<double>{std::nan("")}, keys, enc), NumericError);
}

TEST_CASE("he_add: additive identity, commutativity, five-term sums") {
    Rng key_rng(10);
    const HEKeys keys = keygen({}, key_rng);
    Rng rng(11), enc(12);

    const auto a = random_vector(rng, 300, -1, 1);
    const std::vector<double> zero(300, 0.0);
    const CipherVector ca = encrypt(a, keys, enc);
    const CipherVector cz = encrypt(zero, keys, enc);
    CHECK(max_abs_diff(decrypt(he_add(ca, cz), keys), a) <= 2 * kEps);

    const auto b = random_vector(rng, 300, -1, 1);
    const CipherVector cb = encrypt(b, keys, enc);
    const auto ab = decrypt(he_add(ca, cb), keys);
    const auto ba = decrypt(he_add(cb, ca), keys);
    CHECK(max_abs_diff(ab, ba) <= 1e-9);

    std::vector<double> plain_sum(300, 0.0);
    CipherVector acc;
    for (int k = 0; k < 5; ++k) {
        const auto term = random_vector(rng, 300, -1, 1);
        for (std::size_t i = 0; i < plain_sum.size(); ++i) plain_sum[i] += term[i];
        const CipherVector ct = encrypt(term, keys, enc);
        acc = k == 0 ? ct : he_add(acc, ct);
    }
    CHECK(max_abs_diff(decrypt(acc, keys), plain_sum) <= 5 * kEps);

    const CipherVector short_c = encrypt(std::vector<double>{1.0}, keys, enc);
    CHECK_THROWS_AS(he_add(ca, short_c), ShapeError);
}

TEST_CASE("he_scale: identity, zero, fractional plaintext products") {
    Rng key_rng(13);
    const HEKeys keys = keygen({}, key_rng);
    Rng rng(14), enc(15);
    const auto v = random_vector(rng, 400, -2, 2);
    const CipherVector c = encrypt(v, keys, enc);

    CHECK(max_abs_diff(decrypt(he_scale(c, 1.0), keys), v) <= kEps);

    const auto zeroed = decrypt(he_scale(c, 0.0), keys);
    for (double x : zeroed) CHECK(std::abs(x) <= kEps);

    std::vector<double> quarter(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) quarter[i] = 0.25 * v[i];
    CHECK(max_abs_diff(decrypt(he_scale(c, 0.25), keys), quarter) <= kEps);

    std::vector<double> negated(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) negated[i] = -1.5 * v[i];
    CHECK(max_abs_diff(decrypt(he_scale(c, -1.5), keys), negated) <= kEps * 1.5);

    // one multiplicative level at these parameters
    CHECK_THROWS_AS(he_scale(he_scale(c, 0.5), 0.5), NumericError);
}

TEST_CASE("homomorphism: weighted sums match plaintext within K*eps") {
    Rng key_rng(16);
    const HEKeys keys = keygen({}, key_rng);
    Rng rng(17), enc(18);
    const std::size_t k = 16, dim = 100;
    std::vector<double> expected(dim, 0.0);
    CipherVector acc;
    for (std::size_t i = 0; i < k; ++i) {
        const auto v = random_vector(rng, dim, -10, 10);
        const double s = rng.uniform(-1, 1);
        for (std::size_t j = 0; j < dim; ++j) expected[j] += s * v[j];
        const CipherVector term = he_scale(encrypt(v, keys, enc), s);
        acc = i == 0 ? term : he_add(acc, term);
    }
    CHECK(max_abs_diff(decrypt(acc, keys), expected) <= static_cast<double>(k) * kEps);
}

TEST_CASE("serialization: ciphertext blobs round-trip losslessly") {
    Rng key_rng(19);
    const HEKeys keys = keygen({}, key_rng);
    Rng rng(20), enc(21);
    const auto v = random_vector(rng, 64, -3, 3);
    CipherVector c = he_scale(encrypt(v, keys, enc), 0.5);
    c = he_add(c, he_scale(encrypt(v, keys, enc), 0.5));

    const auto bytes = c.to_bytes();
    const CipherVector restored = CipherVector::from_bytes(bytes);
    CHECK(restored.plaintext_length() == c.plaintext_length());
    CHECK(restored.scale() == c.scale());
    CHECK(restored.key_id() == c.key_id());
    const auto d1 = decrypt(c, keys);
    const auto d2 = decrypt(restored, keys);
    CHECK(max_abs_diff(d1, d2) == 0.0);

    auto truncated = bytes;
    truncated.pop_back();
    CHECK_THROWS_AS(CipherVector::from_bytes(truncated), DataError);
    auto versioned = bytes;
    versioned[0] = 99;
    CHECK_THROWS_AS(CipherVector::from_bytes(versioned), DataError);
}

TEST_CASE("secure_fedavg: identity weighting and plaintext agreement") {
    Rng key_rng(22);
    const HEKeys keys = keygen({}, key_rng);
    Rng rng(23), enc(24);

    const auto solo = random_vector(rng, 128, -1, 1);
    std::vector<std::pair<CipherVector, long>> one;
    one.emplace_back(encrypt(solo, keys, enc), 37);
    CHECK(max_abs_diff(decrypt(secure_fedavg(one), keys), solo) <= kEps);

    const std::size_t k = 5, dim = 512;
    std::vector<std::pair<CipherVector, long>> updates;
    std::vector<RoundUpdate> plain(k);
    for (std::size_t i = 0; i < k; ++i) {
        plain[i].client_id = "c" + std::to_string(i);
        plain[i].params = random_vector(rng, dim, -1, 1);
        plain[i].num_samples = 40; // equal sizes
        updates.emplace_back(encrypt(plain[i].params, keys, enc), plain[i].num_samples);
    }
    const auto expected = fedavg(plain);
    CHECK(max_abs_diff(decrypt(secure_fedavg(updates), keys), expected) <=
          static_cast<double>(k) * kEps);

    updates[0].second = 0;
    CHECK_THROWS_AS(secure_fedavg(updates), DataError);
    CHECK_THROWS_AS(secure_fedavg(std::vector<std::pair<CipherVector, long>>{}), DataError);
}
