#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "foilgen/error.hpp"
#include "foilgen/geometry.hpp"
#include "foilgen/nn.hpp"

namespace foilgen {

using nn::Matrix;
using nn::Vector;

inline constexpr int kLatentDim = 32;
inline constexpr int kFeatureDim = 128;
inline constexpr double kLogvarClamp = 10.0;
inline constexpr double kProbClamp = 1e-7;

/// 200 -> 256 -> 128 trunk with separate linear heads for mean and log-variance.
struct Encoder {
    nn::Mlp trunk;
    nn::Mlp head_mu;
    nn::Mlp head_logvar;
};

/// 32 -> 128 -> 256 -> 200, tanh output.
struct Decoder {
    nn::Mlp net;
};

/// 200 -> 256 -> 128 -> 1, sigmoid output. Layer 1 (width 128) is the
/// feature layer used by the layer loss and by FID.
struct Discriminator {
    nn::Mlp net;
    static constexpr std::size_t kFeatureLayer = 1;
};

inline Encoder make_encoder(std::mt19937_64& rng) {
    using A = nn::Activation;
    Encoder e;
    const std::array trunk_w{static_cast<int>(kAirfoilDim), 256, 128};
    const std::array trunk_a{A::LeakyRelu, A::LeakyRelu};
    e.trunk = nn::make_mlp(trunk_w, trunk_a, rng);
    const std::array head_w{128, kLatentDim};
    const std::array head_a{A::Identity};
    e.head_mu = nn::make_mlp(head_w, head_a, rng);
    e.head_logvar = nn::make_mlp(head_w, head_a, rng);
    return e;
}

inline Decoder make_decoder(std::mt19937_64& rng) {
    using A = nn::Activation;
    const std::array w{kLatentDim, 128, 256, static_cast<int>(kAirfoilDim)};
    const std::array a{A::LeakyRelu, A::LeakyRelu, A::Tanh};
    return {nn::make_mlp(w, a, rng)};
}

inline Discriminator make_discriminator(std::mt19937_64& rng) {
    using A = nn::Activation;
    const std::array w{static_cast<int>(kAirfoilDim), 256, kFeatureDim, 1};
    const std::array a{A::LeakyRelu, A::LeakyRelu, A::Sigmoid};
    return {nn::make_mlp(w, a, rng)};
}

struct Encoding {
    Matrix mu;
    Matrix logvar;  // clamped to [-10, 10]
};

inline Matrix clamp_logvar(const Matrix& raw) {
    return raw.cwiseMax(-kLogvarClamp).cwiseMin(kLogvarClamp);
}

inline Encoding encode(const Encoder& enc, const Matrix& x) {
    if (x.cols() != static_cast<Eigen::Index>(kAirfoilDim))
        throw Error(Errc::ShapeMismatch, "encoder expects 200 columns, got " + std::to_string(x.cols()));
    Matrix h = nn::predict(enc.trunk, x);
    return {nn::predict(enc.head_mu, h), clamp_logvar(nn::predict(enc.head_logvar, h))};
}

inline Matrix decode(const Decoder& dec, const Matrix& z) {
    if (z.cols() != kLatentDim)
        throw Error(Errc::ShapeMismatch, "decoder expects 32 columns, got " + std::to_string(z.cols()));
    return nn::predict(dec.net, z);
}

inline Matrix discriminate(const Discriminator& disc, const Matrix& x) {
    if (x.cols() != static_cast<Eigen::Index>(kAirfoilDim)) throw Error(Errc::ShapeMismatch, "discriminator expects 200 columns");
    return nn::predict(disc.net, x);
}

/// Second-hidden-layer activations, one 128-vector per row.
inline Matrix disc_features(const Discriminator& disc, const Matrix& x) {
    if (x.cols() != static_cast<Eigen::Index>(kAirfoilDim)) throw Error(Errc::ShapeMismatch, "discriminator expects 200 columns");
    return nn::hidden(disc.net, x, Discriminator::kFeatureLayer);
}

inline Matrix reparameterize(const Matrix& mu, const Matrix& logvar, const Matrix& eps) {
    if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols() || mu.rows() != eps.rows() || mu.cols() != eps.cols())
        throw Error(Errc::ShapeMismatch, "mu, logvar and eps must share a shape");
    return mu + ((0.5 * logvar.array()).exp() * eps.array()).matrix();
}

// ---------------------------------------------------------------------------
// Loss terms. All reductions are means over every element so the weights
// below do not depend on batch size.

/// KL(q(z|x) || N(0, I)), averaged over batch and latent dimensions.
inline double kl_prior_loss(const Matrix& mu, const Matrix& logvar) {
    if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols()) throw Error(Errc::ShapeMismatch, "mu/logvar shape");
    if (mu.size() == 0) return 0.0;
    const double v = (-0.5 * (1.0 + logvar.array() - mu.array().square() - logvar.array().exp())).mean();
    if (!std::isfinite(v)) throw Error(Errc::NonFiniteLoss, "prior loss is not finite");
    return v;
}

struct KlGradient {
    Matrix mu;
    Matrix logvar;
};

inline KlGradient kl_prior_grad(const Matrix& mu, const Matrix& logvar) {
    const double n = static_cast<double>(mu.size());
    return {mu / n, (0.5 * (logvar.array().exp() - 1.0) / n).matrix()};
}

inline double recon_loss(const Matrix& x_recon, const Matrix& x) {
    if (x_recon.rows() != x.rows() || x_recon.cols() != x.cols()) throw Error(Errc::ShapeMismatch, "reconstruction shape");
    if (x.size() == 0) return 0.0;
    return (x_recon - x).array().square().mean();
}

inline Matrix recon_grad(const Matrix& x_recon, const Matrix& x) {
    return 2.0 * (x_recon - x) / static_cast<double>(x.size());
}

namespace detail {

inline void check_probabilities(const Matrix& p, const char* what) {
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double v = p.data()[i];
        if (!(v >= 0.0 && v <= 1.0))
            throw Error(Errc::OutOfRangeProbability, std::string(what) + " holds " + std::to_string(v));
    }
}

inline double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

inline bool clamped(double p) { return p < kProbClamp || p > 1.0 - kProbClamp; }

}  // namespace detail

/// mean log D(x) + mean log(1 - D(x~)) + mean log(1 - D(x^)), probabilities clamped.
inline double gan_loss(const Matrix& d_real, const Matrix& d_recon, const Matrix& d_fake) {
    if (d_real.size() != d_recon.size() || d_real.size() != d_fake.size())
        throw Error(Errc::ShapeMismatch, "discriminator outputs differ in size");
    detail::check_probabilities(d_real, "d_real");
    detail::check_probabilities(d_recon, "d_recon");
    detail::check_probabilities(d_fake, "d_fake");
    if (d_real.size() == 0) return 0.0;
    auto lg = [](double p) { return std::log(detail::clamp_prob(p)); };
    auto lg1 = [](double p) { return std::log(1.0 - detail::clamp_prob(p)); };
    return d_real.unaryExpr(lg).mean() + d_recon.unaryExpr(lg1).mean() + d_fake.unaryExpr(lg1).mean();
}

/// Non-saturating generator objective: -(mean log D(x~) + mean log D(x^)).
inline double generator_gan_loss(const Matrix& d_recon, const Matrix& d_fake) {
    detail::check_probabilities(d_recon, "d_recon");
    detail::check_probabilities(d_fake, "d_fake");
    auto lg = [](double p) { return std::log(detail::clamp_prob(p)); };
    double v = 0.0;
    if (d_recon.size() > 0) v -= d_recon.unaryExpr(lg).mean();
    if (d_fake.size() > 0) v -= d_fake.unaryExpr(lg).mean();
    return v;
}

/// Mean |features(real) - features(generated)|, paired by row.
inline double layer_loss(const Matrix& features_real, const Matrix& features_gen) {
    if (features_real.rows() != features_gen.rows() || features_real.cols() != features_gen.cols())
        throw Error(Errc::ShapeMismatch, "feature batches differ in shape");
    if (features_real.size() == 0) return 0.0;
    return (features_real - features_gen).cwiseAbs().mean();
}

inline double layer_loss(const Discriminator& disc, const Matrix& x_real, const Matrix& x_gen) {
    if (x_real.rows() != x_gen.rows()) throw Error(Errc::ShapeMismatch, "batch sizes differ");
    return layer_loss(disc_features(disc, x_real), disc_features(disc, x_gen));
}

// ---------------------------------------------------------------------------
// Training objectives.

struct LossWeights {
    double prior = 0.0;
    double layer = 0.0;
    double recon = 0.0;
    double gan = 0.0;
};

struct LossTerms {
    double recon = 0.0;
    double prior = 0.0;
    double layer = 0.0;
    double gan = 0.0;  // full three-branch GAN value
};

/// Per-batch standard-normal draws: reparameterization noise and prior samples.
struct BatchNoise {
    Matrix eps;
    Matrix z_hat;
};

inline Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = n01(rng);
    return m;
}

inline BatchNoise draw_noise(Eigen::Index batch, std::mt19937_64& rng) {
    BatchNoise n;
    n.eps = standard_normal(batch, kLatentDim, rng);
    n.z_hat = standard_normal(batch, kLatentDim, rng);
    return n;
}

/// Generator-side objective value computed with plain forward passes:
/// prior*KL + layer*L_layer + recon*L_recon + gan*(non-saturating GAN).
/// The layer loss averages the reconstruction and sampled branches.
inline double generator_objective_value(const Encoder& enc, const Decoder& dec, const Discriminator* disc,
                                        const Matrix& x, const BatchNoise& noise, const LossWeights& w,
                                        LossTerms* terms = nullptr) {
    auto e = encode(enc, x);
    Matrix z = reparameterize(e.mu, e.logvar, noise.eps);
    Matrix xt = decode(dec, z);
    LossTerms t;
    t.recon = recon_loss(xt, x);
    t.prior = kl_prior_loss(e.mu, e.logvar);
    double gen_gan = 0.0;
    if (disc) {
        Matrix xh = decode(dec, noise.z_hat);
        Matrix fr = disc_features(*disc, x);
        t.layer = 0.5 * (layer_loss(fr, disc_features(*disc, xt)) + layer_loss(fr, disc_features(*disc, xh)));
        Matrix dr = discriminate(*disc, x);
        Matrix dt = discriminate(*disc, xt);
        Matrix dh = discriminate(*disc, xh);
        t.gan = gan_loss(dr, dt, dh);
        gen_gan = generator_gan_loss(dt, dh);
    }
    if (terms) *terms = t;
    return w.prior * t.prior + w.layer * t.layer + w.recon * t.recon + w.gan * gen_gan;
}

/// Discriminator objective value, -L_GAN.
inline double discriminator_objective_value(const Encoder& enc, const Decoder& dec, const Discriminator& disc,
                                            const Matrix& x, const BatchNoise& noise) {
    auto e = encode(enc, x);
    Matrix xt = decode(dec, reparameterize(e.mu, e.logvar, noise.eps));
    Matrix xh = decode(dec, noise.z_hat);
    return -gan_loss(discriminate(disc, x), discriminate(disc, xt), discriminate(disc, xh));
}

struct GradRequest {
    bool encoder = false;
    bool decoder = false;
    bool discriminator = false;
};

struct EncoderGradients {
    nn::Gradients trunk;
    nn::Gradients mu;
    nn::Gradients logvar;
};

struct ObjectiveGradients {
    double value = 0.0;
    LossTerms terms;
    std::optional<EncoderGradients> encoder;
    std::optional<nn::Gradients> decoder;
    std::optional<nn::Gradients> discriminator;
};

namespace detail {

inline Matrix stack_rows(std::initializer_list<const Matrix*> parts) {
    Eigen::Index rows = 0;
    Eigen::Index cols = (*parts.begin())->cols();
    for (const auto* p : parts) rows += p->rows();
    Matrix out(rows, cols);
    Eigen::Index r = 0;
    for (const auto* p : parts) {
        out.middleRows(r, p->rows()) = *p;
        r += p->rows();
    }
    return out;
}

}  // namespace detail

/// Reverse-mode gradients of generator_objective_value. When only encoder
/// gradients are requested the sampled branch is skipped; it does not depend
/// on encoder parameters, so `value` and `terms` then omit its contribution.
inline ObjectiveGradients generator_objective_grad(const Encoder& enc, const Decoder& dec, const Discriminator* disc,
                                                   const Matrix& x, const BatchNoise& noise, const LossWeights& w,
                                                   GradRequest req) {
    const Eigen::Index b = x.rows();
    if (x.cols() != static_cast<Eigen::Index>(kAirfoilDim)) throw Error(Errc::ShapeMismatch, "x must have 200 columns");
    if (noise.eps.rows() != b || noise.z_hat.rows() != b) throw Error(Errc::ShapeMismatch, "noise batch size");

    auto trunk_c = nn::forward(enc.trunk, x);
    auto mu_c = nn::forward(enc.head_mu, trunk_c.output());
    auto lv_c = nn::forward(enc.head_logvar, trunk_c.output());
    const Matrix& mu = mu_c.output();
    const Matrix lv = clamp_logvar(lv_c.output());
    const Matrix sigma = (0.5 * lv.array()).exp().matrix();
    const Matrix z = mu + sigma.cwiseProduct(noise.eps);

    const bool sampled_branch = disc != nullptr && (req.decoder || req.discriminator || !req.encoder);
    const Matrix dec_in = sampled_branch ? detail::stack_rows({&z, &noise.z_hat}) : z;
    auto dec_c = nn::forward(dec.net, dec_in);
    const Matrix& dec_out = dec_c.output();
    const Matrix xt = dec_out.topRows(b);

    ObjectiveGradients out;
    out.terms.recon = recon_loss(xt, x);
    out.terms.prior = kl_prior_loss(mu, lv);
    Matrix g_dec_out = Matrix::Zero(dec_out.rows(), dec_out.cols());
    g_dec_out.topRows(b) = w.recon * recon_grad(xt, x);
    double gen_gan = 0.0;

    if (disc) {
        const Matrix xh = sampled_branch ? Matrix(dec_out.bottomRows(b)) : Matrix();
        const Matrix d_in = sampled_branch ? detail::stack_rows({&x, &xt, &xh}) : detail::stack_rows({&x, &xt});
        auto d_c = nn::forward(disc->net, d_in);
        const Matrix& feats = d_c.outputs[Discriminator::kFeatureLayer];
        const Matrix& prob = d_c.output();
        const Matrix fr = feats.topRows(b);
        const Matrix ft = feats.middleRows(b, b);
        const double feat_n = static_cast<double>(fr.size());

        Matrix tap = Matrix::Zero(feats.rows(), feats.cols());
        Matrix up = Matrix::Zero(prob.rows(), prob.cols());
        auto sign = [](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); };

        // Layer loss, reconstruction branch.
        const Matrix st = (ft - fr).unaryExpr(sign);
        out.terms.layer = 0.5 * layer_loss(fr, ft);
        tap.middleRows(b, b) = 0.5 * w.layer * st / feat_n;
        tap.topRows(b) -= 0.5 * w.layer * st / feat_n;

        // Non-saturating GAN, reconstruction branch.
        auto nsat_grad = [&](Eigen::Index row0) {
            for (Eigen::Index r = 0; r < b; ++r) {
                const double p = prob(row0 + r, 0);
                up(row0 + r, 0) = detail::clamped(p) ? 0.0 : -w.gan / (p * static_cast<double>(b));
            }
        };
        const Matrix dr = prob.topRows(b);
        const Matrix dt = prob.middleRows(b, b);
        nsat_grad(b);

        if (sampled_branch) {
            const Matrix fh = feats.bottomRows(b);
            const Matrix sh = (fh - fr).unaryExpr(sign);
            out.terms.layer += 0.5 * layer_loss(fr, fh);
            tap.bottomRows(b) = 0.5 * w.layer * sh / feat_n;
            tap.topRows(b) -= 0.5 * w.layer * sh / feat_n;
            nsat_grad(2 * b);
            const Matrix dh = prob.bottomRows(b);
            out.terms.gan = gan_loss(dr, dt, dh);
            gen_gan = generator_gan_loss(dt, dh);
        } else {
            gen_gan = generator_gan_loss(dt, Matrix());
        }

        const std::array taps{nn::Tap{Discriminator::kFeatureLayer, std::move(tap)}};
        auto d_g = nn::backward(disc->net, d_c, up, taps, req.discriminator);
        g_dec_out.topRows(b) += d_g.input.middleRows(b, b);
        if (sampled_branch) g_dec_out.bottomRows(b) += d_g.input.bottomRows(b);
        if (req.discriminator) out.discriminator = std::move(d_g);
    }

    out.value = w.prior * out.terms.prior + w.layer * out.terms.layer + w.recon * out.terms.recon + w.gan * gen_gan;
    if (!std::isfinite(out.value))
        throw Error(Errc::NonFiniteLoss, "generator objective not finite (recon=" + std::to_string(out.terms.recon) +
                                             ", prior=" + std::to_string(out.terms.prior) +
                                             ", layer=" + std::to_string(out.terms.layer) + ")");

    if (!req.encoder && !req.decoder) return out;
    auto dec_g = nn::backward(dec.net, dec_c, g_dec_out, {}, req.decoder);
    if (req.decoder) out.decoder = dec_g;
    if (!req.encoder) return out;

    const Matrix dz = dec_g.input.topRows(b);
    auto kl = kl_prior_grad(mu, lv);
    Matrix d_mu = dz + w.prior * kl.mu;
    Matrix d_lv = (dz.array() * noise.eps.array() * 0.5 * sigma.array()).matrix() + w.prior * kl.logvar;
    const Matrix& lv_raw = lv_c.output();
    for (Eigen::Index i = 0; i < d_lv.size(); ++i)
        if (lv_raw.data()[i] < -kLogvarClamp || lv_raw.data()[i] > kLogvarClamp) d_lv.data()[i] = 0.0;

    EncoderGradients eg;
    eg.mu = nn::backward(enc.head_mu, mu_c, d_mu);
    eg.logvar = nn::backward(enc.head_logvar, lv_c, d_lv);
    Matrix d_h = eg.mu.input + eg.logvar.input;
    eg.trunk = nn::backward(enc.trunk, trunk_c, d_h);
    out.encoder = std::move(eg);
    return out;
}

/// Gradient of -L_GAN with respect to discriminator parameters, plus the
/// batch's loss terms for logging.
inline ObjectiveGradients discriminator_objective_grad(const Encoder& enc, const Decoder& dec,
                                                       const Discriminator& disc, const Matrix& x,
                                                       const BatchNoise& noise) {
    const Eigen::Index b = x.rows();
    auto e = encode(enc, x);
    const Matrix z = reparameterize(e.mu, e.logvar, noise.eps);
    const Matrix dec_out = decode(dec, detail::stack_rows({&z, &noise.z_hat}));
    const Matrix xt = dec_out.topRows(b);
    const Matrix xh = dec_out.bottomRows(b);
    auto d_c = nn::forward(disc.net, detail::stack_rows({&x, &xt, &xh}));
    const Matrix& prob = d_c.output();
    const Matrix& feats = d_c.outputs[Discriminator::kFeatureLayer];

    ObjectiveGradients out;
    out.terms.recon = recon_loss(xt, x);
    out.terms.prior = kl_prior_loss(e.mu, e.logvar);
    out.terms.layer = 0.5 * (layer_loss(feats.topRows(b), feats.middleRows(b, b)) +
                             layer_loss(feats.topRows(b), feats.bottomRows(b)));
    out.terms.gan = gan_loss(prob.topRows(b), prob.middleRows(b, b), prob.bottomRows(b));
    out.value = -out.terms.gan;
    if (!std::isfinite(out.value)) throw Error(Errc::NonFiniteLoss, "discriminator objective not finite");

    Matrix up(prob.rows(), 1);
    const double inv_b = 1.0 / static_cast<double>(b);
    for (Eigen::Index r = 0; r < prob.rows(); ++r) {
        const double p = prob(r, 0);
        if (detail::clamped(p))
            up(r, 0) = 0.0;
        else if (r < b)
            up(r, 0) = -inv_b / p;  // d/dp of -log p
        else
            up(r, 0) = inv_b / (1.0 - p);  // d/dp of -log(1 - p)
    }
    out.discriminator = nn::backward(disc.net, d_c, up);
    return out;
}

// ---------------------------------------------------------------------------
// Training.

enum class ModelKind { Vaegan, Vae };

inline const char* model_kind_name(ModelKind k) { return k == ModelKind::Vaegan ? "vaegan" : "vae"; }

struct TrainConfig {
    int epochs = 5000;
    double lr_initial = 5e-4;
    double lr_after_decay = 5e-5;
    int decay_epoch = 2500;
    int batch_size = 16;
    double lambda_prior = 0.1;
    double lambda_layer = 0.1;
    double lambda_recon = 10.0;
    double lambda_gan_dec = 5.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (epochs <= 0 || batch_size <= 0 || decay_epoch <= 0 || !(lr_initial > 0.0) || !(lr_after_decay > 0.0) ||
            !(lambda_prior > 0.0) || !(lambda_layer > 0.0) || !(lambda_recon > 0.0) || !(lambda_gan_dec > 0.0))
            throw Error(Errc::ConfigInvalid, "training parameters must be positive");
    }

    double learning_rate(int epoch) const { return epoch < decay_epoch ? lr_initial : lr_after_decay; }
};

struct ModelCheckpoint {
    ModelKind kind = ModelKind::Vaegan;
    Encoder encoder;
    Decoder decoder;
    std::optional<Discriminator> discriminator;
    TrainConfig config;
    double scale = 1.0;
    std::int64_t epoch = 0;
    std::uint64_t rng_summary = 0;
};

struct EpochStats {
    int epoch = 0;  // 1-based count of completed epochs
    LossTerms mean;
    double learning_rate = 0.0;
};

using EpochCallback = std::function<void(const EpochStats&, const ModelCheckpoint&)>;

inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t rng_fingerprint(const std::mt19937_64& rng) {
    std::ostringstream os;
    os << rng;
    const auto s = os.str();
    return fnv1a64(s.data(), s.size());
}

/// Encoder means decoded back; mean squared error over all values.
inline double reconstruction_mse(const Encoder& enc, const Decoder& dec, const Matrix& rows) {
    if (rows.rows() == 0) throw Error(Errc::EmptyDataset, "no rows");
    return recon_loss(decode(dec, encode(enc, rows).mu), rows);
}

inline double reconstruction_mse(const ModelCheckpoint& m, const Matrix& rows) {
    return reconstruction_mse(m.encoder, m.decoder, rows);
}

namespace detail {

struct Optimizers {
    nn::AdamState trunk, mu, logvar, dec, disc;
};

inline void set_lr(Optimizers& o, double lr) {
    for (auto* s : {&o.trunk, &o.mu, &o.logvar, &o.dec, &o.disc}) s->lr = lr;
}

inline void step_encoder(Optimizers& o, Encoder& enc, const EncoderGradients& g) {
    nn::adam_step(o.trunk, enc.trunk, g.trunk);
    nn::adam_step(o.mu, enc.head_mu, g.mu);
    nn::adam_step(o.logvar, enc.head_logvar, g.logvar);
}

inline ModelCheckpoint train_model(const Matrix& rows, double scale, const TrainConfig& cfg, ModelKind kind,
                                   const EpochCallback& on_epoch) {
    cfg.validate();
    if (rows.rows() == 0) throw Error(Errc::EmptyDataset, "training needs at least one airfoil");
    if (rows.cols() != static_cast<Eigen::Index>(kAirfoilDim)) throw Error(Errc::ShapeMismatch, "dataset rows must have 200 values");

    std::mt19937_64 rng(cfg.seed);
    ModelCheckpoint m;
    m.kind = kind;
    m.config = cfg;
    m.scale = scale;
    m.encoder = make_encoder(rng);
    m.decoder = make_decoder(rng);
    if (kind == ModelKind::Vaegan) m.discriminator = make_discriminator(rng);

    Optimizers opt{nn::make_adam(m.encoder.trunk, cfg.lr_initial), nn::make_adam(m.encoder.head_mu, cfg.lr_initial),
                   nn::make_adam(m.encoder.head_logvar, cfg.lr_initial), nn::make_adam(m.decoder.net, cfg.lr_initial),
                   m.discriminator ? nn::make_adam(m.discriminator->net, cfg.lr_initial) : nn::AdamState{}};

    const LossWeights enc_w{cfg.lambda_prior, cfg.lambda_layer, cfg.lambda_recon, 0.0};
    const LossWeights dec_w{cfg.lambda_prior, cfg.lambda_layer, cfg.lambda_recon, cfg.lambda_gan_dec};
    const LossWeights vae_w{cfg.lambda_prior, 0.0, cfg.lambda_recon, 0.0};

    const auto n = static_cast<std::size_t>(rows.rows());
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Matrix batch;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cfg.learning_rate(epoch);
        set_lr(opt, lr);
        std::shuffle(order.begin(), order.end(), rng);
        LossTerms sum;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
            batch.resize(static_cast<Eigen::Index>(end - start), rows.cols());
            for (std::size_t i = start; i < end; ++i) batch.row(static_cast<Eigen::Index>(i - start)) = rows.row(order[i]);
            const auto noise = draw_noise(batch.rows(), rng);
            try {
                if (kind == ModelKind::Vaegan) {
                    auto& disc = *m.discriminator;
                    auto d = discriminator_objective_grad(m.encoder, m.decoder, disc, batch, noise);
                    nn::adam_step(opt.disc, disc.net, *d.discriminator);
                    auto g_dec = generator_objective_grad(m.encoder, m.decoder, &disc, batch, noise, dec_w,
                                                          {.encoder = false, .decoder = true});
                    nn::adam_step(opt.dec, m.decoder.net, *g_dec.decoder);
                    auto g_enc = generator_objective_grad(m.encoder, m.decoder, &disc, batch, noise, enc_w,
                                                          {.encoder = true, .decoder = false});
                    step_encoder(opt, m.encoder, *g_enc.encoder);
                    sum.recon += d.terms.recon;
                    sum.prior += d.terms.prior;
                    sum.layer += d.terms.layer;
                    sum.gan += d.terms.gan;
                } else {
                    auto g = generator_objective_grad(m.encoder, m.decoder, nullptr, batch, noise, vae_w,
                                                      {.encoder = true, .decoder = true});
                    nn::adam_step(opt.dec, m.decoder.net, *g.decoder);
                    step_encoder(opt, m.encoder, *g.encoder);
                    sum.recon += g.terms.recon;
                    sum.prior += g.terms.prior;
                }
            } catch (const Error& e) {
                if (e.code() != Errc::NonFiniteLoss) throw;
                throw Error(Errc::NonFiniteLoss, std::string(e.what()) + " at epoch " + std::to_string(epoch + 1) +
                                                     ", batch " + std::to_string(batches + 1));
            }
            ++batches;
        }
        m.epoch = epoch + 1;
        if (on_epoch) {
            EpochStats st;
            st.epoch = epoch + 1;
            const double nb = static_cast<double>(batches);
            st.mean = {sum.recon / nb, sum.prior / nb, sum.layer / nb, sum.gan / nb};
            st.learning_rate = lr;
            m.rng_summary = rng_fingerprint(rng);
            on_epoch(st, m);
        }
    }
    m.rng_summary = rng_fingerprint(rng);
    return m;
}

}  // namespace detail

/// Joint VAEGAN training. Per batch: discriminator, then decoder, then
/// encoder, each against a fresh forward pass with the same noise draws.
inline ModelCheckpoint train_vaegan(const Matrix& rows, double scale, const TrainConfig& cfg,
                                    const EpochCallback& on_epoch = {}) {
    return detail::train_model(rows, scale, cfg, ModelKind::Vaegan, on_epoch);
}

/// Same encoder/decoder with 0.1 * prior + 10 * recon and no discriminator.
inline ModelCheckpoint train_vae(const Matrix& rows, double scale, const TrainConfig& cfg,
                                 const EpochCallback& on_epoch = {}) {
    return detail::train_model(rows, scale, cfg, ModelKind::Vae, on_epoch);
}

}  // namespace foilgen
