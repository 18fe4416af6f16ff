#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedad/nn.hpp"

namespace fedad {

enum class ModelKind { AutoEncoder, Vae };

// Encoder: input->hidden (ReLU), dropout, hidden->hidden (ReLU).
// Decoder mirrors it; the final layer applies a sigmoid so outputs land in
// [0,1] like the normalized features.
struct AutoEncoderSpec {
    int input_dim = 0;
    int hidden_dim = 64;
    double dropout = 0.2;
    bool mirror_dropout = true; // dropout inside the decoder as well

    std::vector<nn::LayerSpec> layers() const;
};

// Same trunk as the AutoEncoder plus two linear heads after the encoder
// producing mu and logvar for the latent Gaussian.
struct VaeSpec {
    int input_dim = 0;
    int hidden_dim = 64;
    int latent_dim = 64;
    double dropout = 0.2;
    bool mirror_dropout = true;
    double kl_weight = 1.0;

    std::vector<nn::LayerSpec> encoder_layers() const;
    nn::LayerSpec mu_head() const;
    nn::LayerSpec logvar_head() const;
    std::vector<nn::LayerSpec> decoder_layers() const;
};

// KL(N(mu, exp(logvar)) || N(0, I)) = -1/2 sum(1 + logvar - mu^2 - exp(logvar))
double kl_gaussian(std::span<const double> mu, std::span<const double> logvar);

// Per-sample anomaly score: reconstruction MSE in evaluation mode.
double ae_reconstruction_loss(std::span<const double> params, const AutoEncoderSpec& spec,
                              std::span<const double> x);

struct VaeLossParts {
    double total = 0.0;
    double recon = 0.0;
    double kl = 0.0;
};

// Reparameterized single-sample loss; eps is drawn from rng (one standard
// normal per latent coordinate). The eps overload exists for tests that pin
// the noise.
VaeLossParts vae_loss(std::span<const double> params, const VaeSpec& spec, std::span<const double> x,
                      Rng& rng);
VaeLossParts vae_loss_with_eps(std::span<const double> params, const VaeSpec& spec,
                               std::span<const double> x, std::span<const double> eps);

// Uniform training/scoring handle for both architectures.
class Model {
public:
    Model(ModelKind kind, AutoEncoderSpec ae);
    Model(ModelKind kind, VaeSpec vae);
    static Model autoencoder(AutoEncoderSpec spec) { return Model(ModelKind::AutoEncoder, std::move(spec)); }
    static Model vae(VaeSpec spec) { return Model(ModelKind::Vae, std::move(spec)); }

    ModelKind kind() const { return kind_; }
    int input_dim() const;
    std::size_t param_count() const;
    std::vector<double> init_params(Rng& rng) const;

    // Mean training loss over the batch plus the gradient w.r.t. params
    // (written into grad, which must have param_count() entries).
    double loss_and_grad(std::span<const double> params, const Matrix& batch, Rng& rng,
                         std::span<double> grad) const;

    // Evaluation-mode anomaly score (reconstruction MSE); deterministic.
    double score(std::span<const double> params, std::span<const double> x) const;

    const AutoEncoderSpec& ae_spec() const { return ae_; }
    const VaeSpec& vae_spec() const { return vae_; }

private:
    ModelKind kind_;
    AutoEncoderSpec ae_;
    VaeSpec vae_;
};

struct Case; // defined in dataset.hpp

// Scores every case in order; evaluation mode, so repeated calls agree.
std::vector<std::pair<std::string, double>> score_dataset(const Model& model,
                                                          std::span<const double> params,
                                                          std::span<const Case> cases);

} // namespace fedad
