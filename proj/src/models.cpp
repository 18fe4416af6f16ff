#include "fedad/models.hpp"

#include <cmath>

#include "fedad/dataset.hpp"

namespace fedad {

namespace {

Matrix row_matrix(std::span<const double> x) {
    Matrix m(1, x.size());
    std::copy(x.begin(), x.end(), m.data.begin());
    return m;
}

} // namespace

std::vector<nn::LayerSpec> AutoEncoderSpec::layers() const {
    const double dec_dropout = mirror_dropout ? dropout : 0.0;
    return {
        {input_dim, hidden_dim, nn::Activation::ReLU, dropout},
        {hidden_dim, hidden_dim, nn::Activation::ReLU, 0.0},
        {hidden_dim, hidden_dim, nn::Activation::ReLU, dec_dropout},
        {hidden_dim, input_dim, nn::Activation::Sigmoid, 0.0},
    };
}

std::vector<nn::LayerSpec> VaeSpec::encoder_layers() const {
    return {
        {input_dim, hidden_dim, nn::Activation::ReLU, dropout},
        {hidden_dim, hidden_dim, nn::Activation::ReLU, 0.0},
    };
}

nn::LayerSpec VaeSpec::mu_head() const {
    return {hidden_dim, latent_dim, nn::Activation::Identity, 0.0};
}

nn::LayerSpec VaeSpec::logvar_head() const {
    return {hidden_dim, latent_dim, nn::Activation::Identity, 0.0};
}

std::vector<nn::LayerSpec> VaeSpec::decoder_layers() const {
    return {
        {latent_dim, hidden_dim, nn::Activation::ReLU, mirror_dropout ? dropout : 0.0},
        {hidden_dim, input_dim, nn::Activation::Sigmoid, 0.0},
    };
}

double kl_gaussian(std::span<const double> mu, std::span<const double> logvar) {
    if (mu.size() != logvar.size()) throw ShapeError("kl_gaussian: mu/logvar length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        if (!std::isfinite(mu[i]) || !std::isfinite(logvar[i])) {
            throw NumericError("kl_gaussian: non-finite input");
        }
        acc += 1.0 + logvar[i] - mu[i] * mu[i] - std::exp(logvar[i]);
    }
    return -0.5 * acc;
}

double ae_reconstruction_loss(std::span<const double> params, const AutoEncoderSpec& spec,
                              std::span<const double> x) {
    const auto specs = spec.layers();
    const Matrix input = row_matrix(x);
    const Matrix out = nn::forward(params, specs, input, false, nullptr);
    return nn::mse_loss(out, input);
}

namespace {

struct VaeSlices {
    std::span<const double> enc, mu, lv, dec;
};

VaeSlices slice_vae_params(std::span<const double> params, const VaeSpec& spec) {
    const auto enc = spec.encoder_layers();
    const nn::LayerSpec mu = spec.mu_head();
    const nn::LayerSpec lv = spec.logvar_head();
    const auto dec = spec.decoder_layers();
    const std::size_t n_enc = nn::param_count(enc);
    const std::size_t n_mu = nn::param_count({&mu, 1});
    const std::size_t n_lv = nn::param_count({&lv, 1});
    const std::size_t n_dec = nn::param_count(dec);
    if (params.size() != n_enc + n_mu + n_lv + n_dec) {
        throw ShapeError("vae: parameter span length does not match the architecture");
    }
    return {params.subspan(0, n_enc), params.subspan(n_enc, n_mu),
            params.subspan(n_enc + n_mu, n_lv), params.subspan(n_enc + n_mu + n_lv, n_dec)};
}

// Forward + loss + optional gradient for a batch. eps must be rows x latent
// when given; otherwise it is sampled from rng (training) or zero (scoring).
struct VaeBatchResult {
    double recon = 0.0;
    double kl = 0.0;
};

VaeBatchResult vae_batch(std::span<const double> params, const VaeSpec& spec, const Matrix& batch,
                         bool training, Rng* rng, const Matrix* eps_in,
                         std::vector<double>* grad_out) {
    const auto enc_specs = spec.encoder_layers();
    const nn::LayerSpec mu_spec = spec.mu_head();
    const nn::LayerSpec lv_spec = spec.logvar_head();
    const auto dec_specs = spec.decoder_layers();
    const auto slices = slice_vae_params(params, spec);

    nn::ForwardCache cache_e, cache_mu, cache_lv, cache_d;
    nn::ForwardCache* ce = grad_out ? &cache_e : nullptr;
    nn::ForwardCache* cm = grad_out ? &cache_mu : nullptr;
    nn::ForwardCache* cl = grad_out ? &cache_lv : nullptr;
    nn::ForwardCache* cd = grad_out ? &cache_d : nullptr;

    const Matrix h = nn::forward(slices.enc, enc_specs, batch, training, rng, ce);
    const Matrix mu = nn::forward(slices.mu, {&mu_spec, 1}, h, false, nullptr, cm);
    const Matrix lv = nn::forward(slices.lv, {&lv_spec, 1}, h, false, nullptr, cl);

    Matrix eps(mu.rows, mu.cols, 0.0);
    if (eps_in) {
        require_same_shape(*eps_in, mu, "vae eps");
        eps = *eps_in;
    } else if (training) {
        if (!rng) throw NumericError("vae: training requires an rng");
        for (auto& e : eps.data) e = rng->normal();
    }

    Matrix z(mu.rows, mu.cols);
    for (std::size_t i = 0; i < z.size(); ++i) {
        z.data[i] = mu.data[i] + std::exp(0.5 * lv.data[i]) * eps.data[i];
    }

    const Matrix recon = nn::forward(slices.dec, dec_specs, z, training, rng, cd);

    VaeBatchResult result;
    result.recon = nn::mse_loss(recon, batch);
    double kl_acc = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        kl_acc += 1.0 + lv.data[i] - mu.data[i] * mu.data[i] - std::exp(lv.data[i]);
    }
    result.kl = -0.5 * kl_acc / static_cast<double>(mu.rows);

    if (!grad_out) return result;

    const double inv_rows = 1.0 / static_cast<double>(mu.rows);
    const Matrix d_recon = nn::mse_loss_grad(recon, batch);
    nn::BackwardResult back_d = nn::backward(cache_d, d_recon);
    const Matrix& dz = back_d.input_grad;

    Matrix dmu(mu.rows, mu.cols);
    Matrix dlv(mu.rows, mu.cols);
    for (std::size_t i = 0; i < mu.size(); ++i) {
        dmu.data[i] = dz.data[i] + spec.kl_weight * mu.data[i] * inv_rows;
        dlv.data[i] = dz.data[i] * eps.data[i] * 0.5 * std::exp(0.5 * lv.data[i]) +
                      spec.kl_weight * 0.5 * (std::exp(lv.data[i]) - 1.0) * inv_rows;
    }

    nn::BackwardResult back_mu = nn::backward(cache_mu, dmu);
    nn::BackwardResult back_lv = nn::backward(cache_lv, dlv);

    Matrix dh = back_mu.input_grad;
    for (std::size_t i = 0; i < dh.size(); ++i) dh.data[i] += back_lv.input_grad.data[i];
    nn::BackwardResult back_e = nn::backward(cache_e, dh);

    grad_out->clear();
    grad_out->reserve(params.size());
    grad_out->insert(grad_out->end(), back_e.param_grad.begin(), back_e.param_grad.end());
    grad_out->insert(grad_out->end(), back_mu.param_grad.begin(), back_mu.param_grad.end());
    grad_out->insert(grad_out->end(), back_lv.param_grad.begin(), back_lv.param_grad.end());
    grad_out->insert(grad_out->end(), back_d.param_grad.begin(), back_d.param_grad.end());
    return result;
}

} // namespace

VaeLossParts vae_loss_with_eps(std::span<const double> params, const VaeSpec& spec,
                               std::span<const double> x, std::span<const double> eps) {
    const Matrix input = row_matrix(x);
    Matrix eps_m(1, eps.size());
    std::copy(eps.begin(), eps.end(), eps_m.data.begin());
    const auto r = vae_batch(params, spec, input, false, nullptr, &eps_m, nullptr);
    return {r.recon + spec.kl_weight * r.kl, r.recon, r.kl};
}

VaeLossParts vae_loss(std::span<const double> params, const VaeSpec& spec, std::span<const double> x,
                      Rng& rng) {
    std::vector<double> eps(static_cast<std::size_t>(spec.latent_dim));
    for (auto& e : eps) e = rng.normal();
    return vae_loss_with_eps(params, spec, x, eps);
}

Model::Model(ModelKind kind, AutoEncoderSpec ae) : kind_(kind), ae_(std::move(ae)) {
    if (kind_ != ModelKind::AutoEncoder) throw ConfigError("model: spec does not match kind");
}

Model::Model(ModelKind kind, VaeSpec vae) : kind_(kind), vae_(std::move(vae)) {
    if (kind_ != ModelKind::Vae) throw ConfigError("model: spec does not match kind");
}

int Model::input_dim() const {
    return kind_ == ModelKind::AutoEncoder ? ae_.input_dim : vae_.input_dim;
}

std::size_t Model::param_count() const {
    if (kind_ == ModelKind::AutoEncoder) return nn::param_count(ae_.layers());
    const auto enc = vae_.encoder_layers();
    const nn::LayerSpec mu = vae_.mu_head();
    const nn::LayerSpec lv = vae_.logvar_head();
    const auto dec = vae_.decoder_layers();
    return nn::param_count(enc) + nn::param_count({&mu, 1}) + nn::param_count({&lv, 1}) +
           nn::param_count(dec);
}

std::vector<double> Model::init_params(Rng& rng) const {
    std::vector<double> out;
    out.reserve(param_count());
    if (kind_ == ModelKind::AutoEncoder) {
        nn::init_layer_params(ae_.layers(), rng, out);
        return out;
    }
    nn::init_layer_params(vae_.encoder_layers(), rng, out);
    const nn::LayerSpec mu = vae_.mu_head();
    const nn::LayerSpec lv = vae_.logvar_head();
    nn::init_layer_params({&mu, 1}, rng, out);
    nn::init_layer_params({&lv, 1}, rng, out);
    nn::init_layer_params(vae_.decoder_layers(), rng, out);
    return out;
}

double Model::loss_and_grad(std::span<const double> params, const Matrix& batch, Rng& rng,
                            std::span<double> grad) const {
    if (grad.size() != param_count()) throw ShapeError("loss_and_grad: gradient span length mismatch");
    if (kind_ == ModelKind::AutoEncoder) {
        nn::ForwardCache cache;
        const auto specs = ae_.layers();
        const Matrix out = nn::forward(params, specs, batch, true, &rng, &cache);
        const double loss = nn::mse_loss(out, batch);
        const nn::BackwardResult back = nn::backward(cache, nn::mse_loss_grad(out, batch));
        std::copy(back.param_grad.begin(), back.param_grad.end(), grad.begin());
        return loss;
    }
    std::vector<double> g;
    const auto r = vae_batch(params, vae_, batch, true, &rng, nullptr, &g);
    std::copy(g.begin(), g.end(), grad.begin());
    return r.recon + vae_.kl_weight * r.kl;
}

double Model::score(std::span<const double> params, std::span<const double> x) const {
    if (kind_ == ModelKind::AutoEncoder) return ae_reconstruction_loss(params, ae_, x);
    // deterministic eval: z = mu
    const Matrix input = row_matrix(x);
    Matrix eps(1, static_cast<std::size_t>(vae_.latent_dim), 0.0);
    const auto r = vae_batch(params, vae_, input, false, nullptr, &eps, nullptr);
    return r.recon;
}

std::vector<std::pair<std::string, double>> score_dataset(const Model& model,
                                                          std::span<const double> params,
                                                          std::span<const Case> cases) {
    if (cases.empty()) throw DataError("score_dataset: empty case list");
    std::vector<std::pair<std::string, double>> out;
    out.reserve(cases.size());
    for (const auto& c : cases) {
        out.emplace_back(c.case_id, model.score(params, c.features));
    }
    return out;
}

} // namespace fedad
