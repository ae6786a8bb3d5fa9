#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "foilgen/checkpoint.hpp"
#include "foilgen/dataset.hpp"
#include "foilgen/vaegan.hpp"
#include "test_util.hpp"

using namespace foilgen;

namespace {

Matrix gaussian(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double s = 1.0) {
    return s * standard_normal(r, c, rng);
}

const Dataset& small_dataset() {
    static const Dataset d = [] {
        auto files = list_dat_files(FOILGEN_DATA_DIR);
        files.resize(std::min<std::size_t>(files.size(), 48));
        auto rep = preprocess_files(files);
        Dataset out = rep.dataset;
        out.rows = out.rows.topRows(32).eval();
        out.names.resize(32);
        return out;
    }();
    return d;
}

Errc code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no foilgen::Error thrown";
    return Errc::MalformedFile;
}

}  // namespace

TEST(Losses, KlExamples) {
    EXPECT_EQ(kl_prior_loss(Matrix::Zero(4, 32), Matrix::Zero(4, 32)), 0.0);
    EXPECT_DOUBLE_EQ(kl_prior_loss(Matrix::Ones(1, 1), Matrix::Zero(1, 1)), 0.5);
    const double ln4 = std::log(4.0);
    EXPECT_NEAR(kl_prior_loss(Matrix::Zero(1, 1), Matrix::Constant(1, 1, ln4)), 0.5 * (4 - ln4 - 1), 1e-15);
    EXPECT_NEAR(0.5 * (4 - ln4 - 1), 0.80685, 1e-5);
}

TEST(Losses, KlNonNegative) {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 200; ++i) {
        const Matrix mu = gaussian(3, 5, rng, 2.0);
        const Matrix lv = gaussian(3, 5, rng, 3.0);
        EXPECT_GE(kl_prior_loss(mu, lv), 0.0);
    }
    EXPECT_GT(kl_prior_loss(Matrix::Constant(1, 2, 1e-3), Matrix::Zero(1, 2)), 0.0);
    EXPECT_GT(kl_prior_loss(Matrix::Zero(1, 2), Matrix::Constant(1, 2, 1e-3)), 0.0);
}

TEST(Losses, Recon) {
    std::mt19937_64 rng(2);
    const Matrix x = gaussian(4, 200, rng);
    EXPECT_EQ(recon_loss(x, x), 0.0);
    EXPECT_NEAR(recon_loss(x.array() + 0.1, x), 0.01, 1e-15);
    EXPECT_THROW(recon_loss(x, Matrix::Zero(4, 199)), Error);
}

TEST(Losses, Gan) {
    const double hi = 1.0 - 1e-7, lo = 1e-7;
    EXPECT_NEAR(gan_loss(Matrix::Constant(8, 1, hi), Matrix::Constant(8, 1, lo), Matrix::Constant(8, 1, lo)), 0.0, 1e-6);
    const Matrix half = Matrix::Constant(5, 1, 0.5);
    EXPECT_NEAR(gan_loss(half, half, half), 3 * std::log(0.5), 1e-15);
    EXPECT_NEAR(gan_loss(half, half, half), -2.0794, 1e-4);
    const double v = gan_loss(Matrix::Zero(2, 1), Matrix::Ones(2, 1), Matrix::Ones(2, 1));
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_EQ(code_of([&] { gan_loss(Matrix::Constant(1, 1, 1.5), half.topRows(1), half.topRows(1)); }),
              Errc::OutOfRangeProbability);
    EXPECT_EQ(code_of([&] { gan_loss(half, half, Matrix::Constant(5, 1, std::nan(""))); }), Errc::OutOfRangeProbability);
}

TEST(Losses, Layer) {
    std::mt19937_64 rng(3);
    const Matrix f = gaussian(4, 128, rng);
    EXPECT_EQ(layer_loss(f, f), 0.0);
    EXPECT_DOUBLE_EQ(layer_loss(f, f.array() + 2.0), 2.0);
    EXPECT_THROW(layer_loss(f, Matrix::Zero(3, 128)), Error);

    auto disc = make_discriminator(rng);
    const Matrix xr = gaussian(6, 200, rng, 0.3);
    const Matrix xg = gaussian(6, 200, rng, 0.3);
    EXPECT_EQ(layer_loss(disc, xr, xr), 0.0);
    // Recompute the second hidden layer by hand.
    auto feat = [&](const Matrix& x) {
        Matrix h = x;
        for (std::size_t l = 0; l < 2; ++l) {
            const auto& L = disc.net.layers[l];
            h = ((h * L.weights.transpose()).rowwise() + L.bias.transpose()).unaryExpr([](double v) {
                return v > 0 ? v : 0.01 * v;
            });
        }
        return h;
    };
    EXPECT_NEAR(layer_loss(disc, xr, xg), (feat(xr) - feat(xg)).cwiseAbs().mean(), 1e-12);
}

TEST(Networks, Shapes) {
    std::mt19937_64 rng(4);
    auto enc = make_encoder(rng);
    auto dec = make_decoder(rng);
    auto disc = make_discriminator(rng);
    const Matrix x = gaussian(7, 200, rng, 0.5);
    auto e = encode(enc, x);
    EXPECT_EQ(e.mu.rows(), 7);
    EXPECT_EQ(e.mu.cols(), 32);
    EXPECT_EQ(e.logvar.cols(), 32);
    EXPECT_EQ(decode(dec, e.mu).cols(), 200);
    EXPECT_EQ(discriminate(disc, x).cols(), 1);
    EXPECT_EQ(disc_features(disc, x).cols(), 128);
    EXPECT_THROW(encode(enc, Matrix::Zero(1, 32)), Error);
    EXPECT_THROW(decode(dec, Matrix::Zero(1, 200)), Error);
}

TEST(Networks, ZeroWeightEncoderGivesBiases) {
    std::mt19937_64 rng(5);
    auto enc = make_encoder(rng);
    for (auto* net : {&enc.trunk, &enc.head_mu, &enc.head_logvar})
        for (auto& l : net->layers) {
            l.weights.setZero();
            l.bias = gaussian(l.out(), 1, rng);
        }
    enc.head_mu.layers[0].bias = gaussian(32, 1, rng);
    enc.head_logvar.layers[0].bias = gaussian(32, 1, rng);
    auto e = encode(enc, gaussian(3, 200, rng));
    for (Eigen::Index r = 0; r < 3; ++r) {
        EXPECT_EQ(Vector(e.mu.row(r).transpose()), enc.head_mu.layers[0].bias);
        EXPECT_EQ(Vector(e.logvar.row(r).transpose()), enc.head_logvar.layers[0].bias);
    }
}

TEST(Networks, LogvarClamped) {
    std::mt19937_64 rng(6);
    auto enc = make_encoder(rng);
    enc.head_logvar.layers[0].weights.setZero();
    enc.head_logvar.layers[0].bias.setConstant(50.0);
    enc.head_logvar.layers[0].bias[0] = -50.0;
    auto e = encode(enc, gaussian(2, 200, rng));
    EXPECT_EQ(e.logvar.maxCoeff(), 10.0);
    EXPECT_EQ(e.logvar.minCoeff(), -10.0);
}

TEST(Networks, DecoderRangeAndDiscriminatorRange) {
    std::mt19937_64 rng(7);
    auto dec = make_decoder(rng);
    auto disc = make_discriminator(rng);
    const Matrix out = decode(dec, gaussian(200, 32, rng, 5.0));
    EXPECT_LT(out.cwiseAbs().maxCoeff(), 1.0);
    const Matrix p = discriminate(disc, out);
    EXPECT_GT(p.minCoeff(), 0.0);
    EXPECT_LT(p.maxCoeff(), 1.0);
}

TEST(Reparameterize, Examples) {
    std::mt19937_64 rng(8);
    const Matrix mu = gaussian(2, 32, rng);
    const Matrix lv = gaussian(2, 32, rng);
    EXPECT_EQ(reparameterize(mu, lv, Matrix::Zero(2, 32)), mu);
    const Matrix e = gaussian(2, 32, rng);
    EXPECT_EQ(reparameterize(mu, Matrix::Zero(2, 32), e), mu + e);
    EXPECT_THROW(reparameterize(mu, lv, Matrix::Zero(1, 32)), Error);
}

TEST(Reparameterize, MonteCarloMean) {
    std::mt19937_64 rng(9);
    const int n = 100000;
    const double mu = 0.7, lv = std::log(2.25);  // sigma 1.5
    const Matrix z = reparameterize(Matrix::Constant(n, 1, mu), Matrix::Constant(n, 1, lv), standard_normal(n, 1, rng));
    EXPECT_NEAR(z.mean(), mu, 3 * 1.5 / std::sqrt(double(n)));
    const double var = (z.array() - z.mean()).square().sum() / (n - 1);
    EXPECT_NEAR(var, 2.25, 0.05);
}

namespace {

struct Fixture {
    Encoder enc;
    Decoder dec;
    Discriminator disc;
    Matrix x;
    BatchNoise noise;
};

Fixture make_fixture(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Fixture f{make_encoder(rng), make_decoder(rng), make_discriminator(rng), Matrix(), {}};
    f.x = gaussian(3, 200, rng, 0.4).cwiseMax(-0.99).cwiseMin(0.99);
    f.noise = draw_noise(3, rng);
    // Give the logvar head some spread so its gradient is not trivially tiny.
    f.enc.head_logvar.layers[0].bias = gaussian(32, 1, rng, 0.5);
    return f;
}

// Samples parameter entries of `net`, perturbs them, and compares central
// differences of `value` to the analytic gradient `g`.
template <typename F>
void fd_check(nn::Mlp& net, const nn::Gradients& g, F value, std::mt19937_64& rng, const std::string& what) {
    const double h = 1e-5;
    int checked = 0;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        for (int s = 0; s < 12; ++s) {
            const bool bias = s % 3 == 2;
            double* p;
            double an;
            if (bias) {
                std::uniform_int_distribution<Eigen::Index> pick(0, net.layers[l].bias.size() - 1);
                const auto i = pick(rng);
                p = &net.layers[l].bias[i];
                an = g.bias[l][i];
            } else {
                std::uniform_int_distribution<Eigen::Index> pick(0, net.layers[l].weights.size() - 1);
                const auto i = pick(rng);
                p = net.layers[l].weights.data() + i;
                an = g.weights[l].data()[i];
            }
            const double orig = *p;
            *p = orig + h;
            const double fp = value();
            *p = orig - h;
            const double fm = value();
            *p = orig;
            const double fd = (fp - fm) / (2 * h);
            EXPECT_LE(std::abs(fd - an), 1e-4 * std::max(std::abs(fd), std::abs(an)) + 1e-9)
                << what << " layer " << l << (bias ? " bias" : " weight") << " fd=" << fd << " an=" << an;
            ++checked;
        }
    }
    EXPECT_GT(checked, 0);
}

}  // namespace

TEST(Gradients, GeneratorObjectivePerTerm) {
    const std::vector<std::pair<const char*, LossWeights>> terms{
        {"prior", {1, 0, 0, 0}}, {"layer", {0, 1, 0, 0}}, {"recon", {0, 0, 1, 0}},
        {"gan", {0, 0, 0, 1}},   {"all", {0.1, 0.1, 10, 5}}};
    std::mt19937_64 pick(10);
    for (const auto& [name, w] : terms) {
        SCOPED_TRACE(name);
        auto f = make_fixture(11);
        auto value = [&] { return generator_objective_value(f.enc, f.dec, &f.disc, f.x, f.noise, w); };
        auto ge = generator_objective_grad(f.enc, f.dec, &f.disc, f.x, f.noise, w, {.encoder = true});
        ASSERT_TRUE(ge.encoder.has_value());
        EXPECT_FALSE(ge.decoder.has_value());
        fd_check(f.enc.trunk, ge.encoder->trunk, value, pick, "encoder trunk");
        fd_check(f.enc.head_mu, ge.encoder->mu, value, pick, "encoder mu");
        fd_check(f.enc.head_logvar, ge.encoder->logvar, value, pick, "encoder logvar");

        auto gd = generator_objective_grad(f.enc, f.dec, &f.disc, f.x, f.noise, w,
                                           {.encoder = false, .decoder = true, .discriminator = true});
        EXPECT_NEAR(gd.value, value(), 1e-12 * std::max(1.0, std::abs(gd.value)));
        fd_check(f.dec.net, *gd.decoder, value, pick, "decoder");
        fd_check(f.disc.net, *gd.discriminator, value, pick, "discriminator");
    }
}

TEST(Gradients, VaeObjective) {
    auto f = make_fixture(12);
    const LossWeights w{0.1, 0, 10, 0};
    std::mt19937_64 pick(13);
    auto value = [&] { return generator_objective_value(f.enc, f.dec, nullptr, f.x, f.noise, w); };
    auto g = generator_objective_grad(f.enc, f.dec, nullptr, f.x, f.noise, w, {.encoder = true, .decoder = true});
    EXPECT_NEAR(g.value, value(), 1e-12);
    fd_check(f.enc.trunk, g.encoder->trunk, value, pick, "encoder trunk");
    fd_check(f.enc.head_logvar, g.encoder->logvar, value, pick, "encoder logvar");
    fd_check(f.dec.net, *g.decoder, value, pick, "decoder");
}

TEST(Gradients, DiscriminatorObjective) {
    auto f = make_fixture(14);
    std::mt19937_64 pick(15);
    auto value = [&] { return discriminator_objective_value(f.enc, f.dec, f.disc, f.x, f.noise); };
    auto g = discriminator_objective_grad(f.enc, f.dec, f.disc, f.x, f.noise);
    EXPECT_NEAR(g.value, value(), 1e-12);
    fd_check(f.disc.net, *g.discriminator, value, pick, "discriminator");
}

TEST(Gradients, FrozenHalfDiscriminator) {
    auto f = make_fixture(16);
    auto& last = f.disc.net.layers.back();
    last.weights *= 1e-4;
    last.bias.setZero();
    f.disc.net.touch();
    const Matrix p = discriminate(f.disc, f.x);
    EXPECT_NEAR(p.mean(), 0.5, 1e-3);
    const LossWeights gan_only{0, 0, 0, 1};
    auto g = generator_objective_grad(f.enc, f.dec, &f.disc, f.x, f.noise, gan_only, {.decoder = true});
    double norm = 0;
    for (const auto& m : g.decoder->weights) norm += m.squaredNorm();
    EXPECT_TRUE(std::isfinite(norm));
    EXPECT_GT(norm, 0.0);

    // Saturated probabilities sit in the clamp; the gradient vanishes.
    last.bias.setConstant(40.0);
    f.disc.net.touch();
    auto gs = generator_objective_grad(f.enc, f.dec, &f.disc, f.x, f.noise, gan_only, {.decoder = true});
    double ns = 0;
    for (const auto& m : gs.decoder->weights) ns += m.squaredNorm();
    EXPECT_EQ(ns, 0.0);
}

TEST(Training, ConfigDefaultsAndValidation) {
    TrainConfig c;
    EXPECT_EQ(c.epochs, 5000);
    EXPECT_EQ(c.decay_epoch, 2500);
    EXPECT_EQ(c.batch_size, 16);
    EXPECT_DOUBLE_EQ(c.lr_initial, 5e-4);
    EXPECT_DOUBLE_EQ(c.lr_after_decay, 5e-5);
    EXPECT_DOUBLE_EQ(c.learning_rate(2499), 5e-4);
    EXPECT_DOUBLE_EQ(c.learning_rate(2500), 5e-5);
    c.validate();
    c.lambda_gan_dec = 0;
    EXPECT_EQ(code_of([&] { c.validate(); }), Errc::ConfigInvalid);
}

TEST(Training, EmptyDataset) {
    TrainConfig c;
    c.epochs = 1;
    EXPECT_EQ(code_of([&] { train_vaegan(Matrix(0, 200), 1.0, c); }), Errc::EmptyDataset);
}

TEST(Training, SmokeRunsReduceReconstruction) {
    const auto& d = small_dataset();
    TrainConfig c;
    c.epochs = 50;
    c.seed = 3;
    for (auto kind : {ModelKind::Vaegan, ModelKind::Vae}) {
        SCOPED_TRACE(model_kind_name(kind));
        std::vector<double> recon;
        auto cb = [&](const EpochStats& s, const ModelCheckpoint&) { recon.push_back(s.mean.recon); };
        auto m = kind == ModelKind::Vaegan ? train_vaegan(d.rows, d.scale, c, cb) : train_vae(d.rows, d.scale, c, cb);
        ASSERT_EQ(recon.size(), 50u);
        EXPECT_LT(recon.back(), recon.front());
        EXPECT_EQ(m.epoch, 50);
        EXPECT_EQ(m.discriminator.has_value(), kind == ModelKind::Vaegan);
        EXPECT_TRUE(std::isfinite(reconstruction_mse(m, d.rows)));
    }
}

TEST(Training, SameSeedSameCheckpoint) {
    const auto& d = small_dataset();
    TrainConfig c;
    c.epochs = 3;
    c.seed = 99;
    const auto a = checkpoint_to_bytes(train_vaegan(d.rows, d.scale, c));
    const auto b = checkpoint_to_bytes(train_vaegan(d.rows, d.scale, c));
    EXPECT_EQ(a, b);
    c.seed = 100;
    EXPECT_NE(a, checkpoint_to_bytes(train_vaegan(d.rows, d.scale, c)));
}

TEST(Checkpoint, RoundTripIsBitwise) {
    const auto& d = small_dataset();
    TrainConfig c;
    c.epochs = 2;
    c.seed = 5;
    const auto m = train_vaegan(d.rows, d.scale, c);
    testutil::TempDir dir;
    save_checkpoint(m, dir / "m.ckpt");
    const auto r = load_checkpoint(dir / "m.ckpt");
    std::mt19937_64 rng(1);
    const Matrix x = gaussian(5, 200, rng, 0.5);
    const Matrix z = gaussian(5, 32, rng);
    EXPECT_EQ(encode(r.encoder, x).mu, encode(m.encoder, x).mu);
    EXPECT_EQ(encode(r.encoder, x).logvar, encode(m.encoder, x).logvar);
    EXPECT_EQ(decode(r.decoder, z), decode(m.decoder, z));
    EXPECT_EQ(discriminate(*r.discriminator, x), discriminate(*m.discriminator, x));
    EXPECT_EQ(r.scale, m.scale);
    EXPECT_EQ(r.epoch, 2);
    EXPECT_EQ(r.rng_summary, m.rng_summary);
    EXPECT_EQ(r.config.seed, 5u);
    EXPECT_EQ(r.config.lambda_recon, 10.0);
    EXPECT_EQ(checkpoint_to_bytes(r), checkpoint_to_bytes(m));
}

TEST(Checkpoint, Errors) {
    std::mt19937_64 rng(2);
    ModelCheckpoint m;
    m.kind = ModelKind::Vae;
    m.encoder = make_encoder(rng);
    m.decoder = make_decoder(rng);
    const auto bytes = checkpoint_to_bytes(m);
    for (const auto& n : checkpoint_tensor_names(bytes)) EXPECT_EQ(n.find("discriminator"), std::string::npos) << n;
    EXPECT_EQ(checkpoint_from_bytes(bytes).kind, ModelKind::Vae);

    EXPECT_EQ(code_of([&] { checkpoint_from_bytes(std::string_view(bytes).substr(0, bytes.size() / 2)); }),
              Errc::CorruptChecksum);
    EXPECT_EQ(code_of([&] { checkpoint_from_bytes(std::string_view(bytes).substr(0, 10)); }), Errc::CorruptChecksum);
    auto flipped = bytes;
    flipped[flipped.size() / 3] ^= 0x01;
    EXPECT_EQ(code_of([&] { checkpoint_from_bytes(flipped); }), Errc::CorruptChecksum);
    EXPECT_EQ(code_of([&] { checkpoint_from_bytes(checkpoint_to_bytes(m, "v0")); }), Errc::VersionMismatch);
    EXPECT_EQ(code_of([&] { load_checkpoint("/nonexistent/dir/x.ckpt"); }), Errc::IoFailure);
}
