#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "foilgen/foilgen.hpp"

namespace fs = std::filesystem;
using namespace foilgen;

namespace {

// Exit codes: 0 success, 1 runtime or evaluation failure, 2 usage or input error.
int exit_code_for(Errc c) {
    switch (c) {
        case Errc::MalformedFile:
        case Errc::AmbiguousFormat:
        case Errc::InvalidCount:
        case Errc::EmptyDataset:
        case Errc::AllZero:
        case Errc::BadWindow:
        case Errc::IoFailure:
        case Errc::VersionMismatch:
        case Errc::CorruptChecksum:
        case Errc::NotAffine:
        case Errc::TooFewPoints:
        case Errc::InsufficientData:
        case Errc::TooFewSamples:
        case Errc::NonPositiveTarget:
        case Errc::ConfigInvalid:
        case Errc::DimensionMismatch:
        case Errc::NoFilesFound:
        case Errc::UnknownAirfoil:
        case Errc::BadCoefficients:
        case Errc::ShapeMismatch:
            return 2;
        default:
            return 1;
    }
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw Error(Errc::IoFailure, "cannot create directory " + dir);
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoFailure, "cannot write " + path);
    out << content;
    if (!out) throw Error(Errc::IoFailure, "write failed for " + path);
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::string sanitize(std::string s) {
    for (auto& c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
    return s;
}

EvaluatorKind parse_evaluator(const std::string& s) {
    if (s == "panel") return EvaluatorKind::Panel;
    if (s == "xfoil") return EvaluatorKind::Xfoil;
    return EvaluatorKind::Auto;
}

struct Shared {
    std::string dataset = "dataset.csv";
    std::string checkpoint = "model.ckpt";
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool smooth = false;
};

RawAirfoil denormalized(const std::string& name, const Eigen::VectorXd& row, double scale, bool smooth) {
    static const auto grid = cosine_grid(kSurfacePoints);
    return to_airfoil(name, smooth ? smooth_airfoil(row) : row, scale, grid);
}

// ---------------------------------------------------------------------------

struct PreprocessArgs {
    std::string input;
    std::string output = "dataset.csv";
};

int cmd_preprocess(const PreprocessArgs& a) {
    auto report = preprocess_files(list_dat_files(a.input));
    for (const auto& [path, why] : report.failures) std::cerr << "skipped " << path << ": " << why << "\n";
    write_dataset(report.dataset, a.output);
    std::cout << "wrote " << report.dataset.size() << " airfoils to " << a.output << " (" << report.failures.size()
              << " skipped, scale " << text::format_double(report.dataset.scale) << ")\n";
    return 0;
}

struct TrainArgs {
    std::string dataset = "dataset.csv";
    std::string output = "model.ckpt";
    std::string log = "train_log.csv";
    std::string model = "vaegan";
    TrainConfig config;
};

int cmd_train(const TrainArgs& a) {
    const auto ds = read_dataset(a.dataset);
    std::ofstream log(a.log, std::ios::binary);
    if (!log) throw Error(Errc::IoFailure, "cannot write " + a.log);
    log << "epoch,recon,prior,layer,gan,learning_rate\n";
    auto on_epoch = [&](const EpochStats& s, const ModelCheckpoint&) {
        log << s.epoch << ',' << text::format_double(s.mean.recon) << ',' << text::format_double(s.mean.prior) << ','
            << text::format_double(s.mean.layer) << ',' << text::format_double(s.mean.gan) << ','
            << text::format_double(s.learning_rate) << '\n';
        log.flush();
    };
    const auto ckpt = a.model == "vae" ? train_vae(ds.rows, ds.scale, a.config, on_epoch)
                                       : train_vaegan(ds.rows, ds.scale, a.config, on_epoch);
    save_checkpoint(ckpt, a.output);
    std::cout << "trained " << model_kind_name(ckpt.kind) << " for " << ckpt.epoch << " epochs; reconstruction MSE "
              << text::format_double(reconstruction_mse(ckpt, ds.rows)) << "\n";
    return 0;
}

struct SynthArgs {
    Shared s;
    std::string mode = "reconstruct";
    std::vector<std::string> names;
    double nu = 0.5;
    bool nu_set = false;
    std::vector<double> coeffs;
    std::size_t count = 10;
};

int cmd_synthesize(const SynthArgs& a) {
    const auto ckpt = load_checkpoint(a.s.checkpoint);
    ensure_dir(a.s.out_dir);
    svg::Plot plot;
    plot.equal_aspect = true;
    plot.x_label = "x/c";
    plot.y_label = "y/c";
    std::vector<RawAirfoil> outputs;

    auto latent_of = [&](const Dataset& ds, const std::string& name) -> LatentVector {
        const auto i = static_cast<Eigen::Index>(ds.index_of(name));
        return encode(ckpt.encoder, ds.rows.row(i)).mu.row(0).transpose();
    };
    auto decode_one = [&](const LatentVector& z) -> Eigen::VectorXd { return decode(ckpt.decoder, z.transpose()).row(0).transpose(); };

    if (a.mode == "reconstruct") {
        const auto ds = read_dataset(a.s.dataset);
        if (a.names.empty()) throw Error(Errc::ConfigInvalid, "reconstruct needs --names");
        for (const auto& name : a.names) {
            const auto i = static_cast<Eigen::Index>(ds.index_of(name));
            Eigen::VectorXd rec = decode_one(latent_of(ds, name));
            if (a.s.smooth) rec = smooth_airfoil(rec);
            const double mse = (rec - ds.rows.row(i).transpose()).array().square().mean();
            std::cout << name << " reconstruction MSE " << text::format_double(mse) << "\n";
            plot.series.push_back(svg::outline(denormalized(name, ds.rows.row(i).transpose(), ckpt.scale, false), name));
            outputs.push_back(denormalized(name + "_reconstructed", rec, ckpt.scale, false));
        }
        plot.title = "Reconstruction";
    } else if (a.mode == "interpolate" || a.mode == "extrapolate") {
        const auto ds = read_dataset(a.s.dataset);
        if (a.names.size() == 2) {
            const double nu = a.nu_set ? a.nu : (a.mode == "extrapolate" ? 2.0 : 0.5);
            const auto z = interpolate2(latent_of(ds, a.names[0]), latent_of(ds, a.names[1]), nu);
            outputs.push_back(denormalized(a.mode + "_" + a.names[0] + "_" + a.names[1], decode_one(z), ckpt.scale, a.s.smooth));
            std::cout << a.mode << " nu=" << text::format_double(nu) << "\n";
        } else if (a.names.size() == 3) {
            if (a.coeffs.size() != 3) throw Error(Errc::BadCoefficients, "three airfoils need --coeffs a,b,c");
            LatentVector z;
            try {
                z = interpolate3(latent_of(ds, a.names[0]), latent_of(ds, a.names[1]), latent_of(ds, a.names[2]),
                                 a.coeffs[0], a.coeffs[1], a.coeffs[2]);
            } catch (const Error& e) {
                if (e.code() == Errc::NotAffine)
                    throw Error(Errc::BadCoefficients, "coefficients sum to " +
                                                           text::format_double(a.coeffs[0] + a.coeffs[1] + a.coeffs[2]) + ", expected 1");
                throw;
            }
            outputs.push_back(denormalized(a.mode + "_" + a.names[0] + "_" + a.names[1] + "_" + a.names[2], decode_one(z),
                                           ckpt.scale, a.s.smooth));
        } else {
            throw Error(Errc::ConfigInvalid, a.mode + " needs two or three --names");
        }
        for (const auto& n : a.names)
            plot.series.push_back(svg::outline(denormalized(n, ds.rows.row(static_cast<Eigen::Index>(ds.index_of(n))).transpose(), ckpt.scale, false), n));
        plot.title = a.mode == "interpolate" ? "Interpolation" : "Extrapolation";
    } else if (a.mode == "sample") {
        const Matrix rows = sample_airfoils(ckpt.decoder, a.count, a.s.seed);
        for (Eigen::Index i = 0; i < rows.rows(); ++i)
            outputs.push_back(denormalized("sample_" + std::to_string(i), rows.row(i).transpose(), ckpt.scale, a.s.smooth));
        plot.title = "Samples";
    } else {
        throw Error(Errc::ConfigInvalid, "unknown mode '" + a.mode + "'");
    }

    for (const auto& airfoil : outputs) {
        const auto path = join(a.s.out_dir, sanitize(airfoil.name) + ".dat");
        write_text(path, write_selig(airfoil));
        plot.series.push_back(svg::outline(airfoil));
        std::cout << "wrote " << path << "\n";
    }
    svg::write(plot, join(a.s.out_dir, a.mode + ".svg"));
    return 0;
}

struct ClusterArgs {
    Shared s;
    std::size_t k = 12;
};

int cmd_cluster(const ClusterArgs& a) {
    const auto ckpt = load_checkpoint(a.s.checkpoint);
    const auto ds = read_dataset(a.s.dataset);
    ensure_dir(a.s.out_dir);
    const Matrix z = encode(ckpt.encoder, ds.rows).mu;
    const auto km = kmeans(z, a.k, a.s.seed);

    std::string csv = "name,cluster,distance\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto c = static_cast<Eigen::Index>(km.assignments[i]);
        const double d = (z.row(static_cast<Eigen::Index>(i)) - km.centroids.row(c)).norm();
        csv += text::csv_field(ds.names[i]) + "," + std::to_string(c) + "," + text::format_double(d) + "\n";
    }
    write_text(join(a.s.out_dir, "clusters.csv"), csv);

    svg::Plot outlines;
    outlines.title = "Cluster centroids";
    outlines.equal_aspect = true;
    const Matrix centroid_rows = decode(ckpt.decoder, km.centroids);
    for (Eigen::Index c = 0; c < centroid_rows.rows(); ++c) {
        char name[32];
        std::snprintf(name, sizeof(name), "centroid_%02d", static_cast<int>(c));
        const auto airfoil = denormalized(name, centroid_rows.row(c).transpose(), ckpt.scale, a.s.smooth);
        write_text(join(a.s.out_dir, std::string(name) + ".dat"), write_selig(airfoil));
        outlines.series.push_back(svg::outline(airfoil));
    }
    svg::write(outlines, join(a.s.out_dir, "centroids.svg"));

    // Latent scatter on the top two principal directions of the codes.
    const Eigen::RowVectorXd mean = z.colwise().mean();
    const Matrix centered = z.rowwise() - mean;
    Eigen::JacobiSVD<Matrix> svd(centered, Eigen::ComputeThinV);
    const Matrix proj = centered * svd.matrixV().leftCols(2);
    svg::Plot scatter;
    scatter.title = "Latent clusters";
    scatter.x_label = "PC 1";
    scatter.y_label = "PC 2";
    for (std::size_t c = 0; c < a.k; ++c) {
        svg::Series s{"cluster " + std::to_string(c), {}, svg::SeriesKind::Scatter};
        for (std::size_t i = 0; i < ds.size(); ++i)
            if (km.assignments[i] == c) s.points.push_back({proj(static_cast<Eigen::Index>(i), 0), proj(static_cast<Eigen::Index>(i), 1)});
        scatter.series.push_back(std::move(s));
    }
    svg::write(scatter, join(a.s.out_dir, "clusters.svg"));
    std::cout << "k=" << a.k << " inertia " << text::format_double(km.inertia) << " after " << km.iterations
              << " iterations\n";
    return 0;
}

struct FidArgs {
    Shared s;
    std::string features_from;
    std::size_t samples = 0;
    bool real_vs_real = false;
};

int cmd_fid(const FidArgs& a) {
    const auto ds = read_dataset(a.s.dataset);
    const auto ckpt = load_checkpoint(a.s.checkpoint);
    std::optional<Discriminator> extractor = ckpt.discriminator;
    if (!a.features_from.empty()) extractor = load_checkpoint(a.features_from).discriminator;
    if (!extractor)
        throw Error(Errc::ConfigInvalid, "checkpoint has no discriminator; pass --features-from with a VAEGAN checkpoint");
    const Matrix real = disc_features(*extractor, ds.rows);
    Matrix other;
    if (a.real_vs_real) {
        other = real;
    } else {
        const std::size_t n = a.samples ? a.samples : ds.size();
        other = disc_features(*extractor, sample_airfoils(ckpt.decoder, n, a.s.seed));
    }
    const double v = fid(other, real);
    std::cout << "fid " << text::format_double(v) << "\n"
              << "generated " << other.rows() << "\n"
              << "real " << real.rows() << "\n";
    return 0;
}

struct EvalArgs {
    Shared s;
    std::string evaluator = "auto";
    std::size_t samples = 100;
    std::size_t real = 0;
    FlowConditions cond;
    XfoilOptions xfoil;
};

int cmd_eval(const EvalArgs& a) {
    const auto eval = make_airfoil_evaluator(parse_evaluator(a.evaluator), a.cond, a.xfoil);
    ensure_dir(a.s.out_dir);
    std::string csv = "name,kind,cl,cd,converged,source\n";
    svg::Plot plot;
    plot.title = "Lift and drag";
    plot.x_label = "Cd";
    plot.y_label = "Cl";
    auto run = [&](const std::string& kind, const std::vector<RawAirfoil>& foils) {
        svg::Series s{kind, {}, svg::SeriesKind::Scatter};
        for (const auto& f : foils) {
            const auto r = eval(f);
            csv += text::csv_field(f.name) + "," + kind + "," + text::format_double(r.cl) + "," + text::format_double(r.cd) +
                   "," + (r.converged ? "1" : "0") + "," + aero_source_name(r.source) + "\n";
            if (r.converged) s.points.push_back({r.cd, r.cl});
        }
        plot.series.push_back(std::move(s));
    };
    if (a.samples > 0) {
        const auto ckpt = load_checkpoint(a.s.checkpoint);
        const Matrix rows = sample_airfoils(ckpt.decoder, a.samples, a.s.seed);
        std::vector<RawAirfoil> foils;
        for (Eigen::Index i = 0; i < rows.rows(); ++i)
            foils.push_back(denormalized("sample_" + std::to_string(i), rows.row(i).transpose(), ckpt.scale, a.s.smooth));
        run("generated", foils);
    }
    if (a.real > 0) {
        const auto ds = read_dataset(a.s.dataset);
        std::vector<RawAirfoil> foils;
        for (std::size_t i = 0; i < std::min(a.real, ds.size()); ++i)
            foils.push_back(denormalized(ds.names[i], ds.rows.row(static_cast<Eigen::Index>(i)).transpose(), ds.scale, false));
        run("dataset", foils);
    }
    write_text(join(a.s.out_dir, "eval.csv"), csv);
    svg::write(plot, join(a.s.out_dir, "eval.svg"));
    std::cout << "wrote " << join(a.s.out_dir, "eval.csv") << "\n";
    return 0;
}

struct OptimizeArgs {
    Shared s;
    std::string evaluator = "auto";
    GaConfig ga;
    FlowConditions cond;
    XfoilOptions xfoil;
};

int cmd_optimize(const OptimizeArgs& a) {
    ensure_dir(a.s.out_dir);
    std::optional<ModelCheckpoint> ckpt;
    LatentEvaluator eval;
    if (a.evaluator == "surrogate") {
        eval = surrogate_evaluator(a.ga.targets);
        if (fs::exists(a.s.checkpoint)) ckpt = load_checkpoint(a.s.checkpoint);
    } else {
        ckpt = load_checkpoint(a.s.checkpoint);
        eval = decoder_evaluator(ckpt->decoder, ckpt->scale, make_airfoil_evaluator(parse_evaluator(a.evaluator), a.cond, a.xfoil));
    }
    auto cfg = a.ga;
    cfg.seed = a.s.seed;
    const auto res = run_ga(cfg, eval);

    std::string csv = "generation,best_fitness,mean_fitness,best_cl,best_cd,mean_cl,mean_cd\n";
    svg::Plot score;
    score.title = "Fitness by generation";
    score.x_label = "generation";
    score.y_label = "fitness";
    svg::Series best{"best", {}, svg::SeriesKind::Line}, mean{"mean", {}, svg::SeriesKind::Line};
    svg::Plot coeffs;
    coeffs.title = "Mean coefficients by generation";
    coeffs.x_label = "generation";
    svg::Series cls{"mean Cl", {}, svg::SeriesKind::Line}, cds{"mean Cd x 100", {}, svg::SeriesKind::Line};
    for (const auto& g : res.history) {
        const auto& b = g.individuals[g.best_index];
        double mcl = 0.0, mcd = 0.0;
        for (const auto& ind : g.individuals) {
            mcl += ind.cl;
            mcd += ind.cd;
        }
        mcl /= static_cast<double>(g.individuals.size());
        mcd /= static_cast<double>(g.individuals.size());
        csv += std::to_string(g.index) + "," + text::format_double(g.best_fitness) + "," + text::format_double(g.mean_fitness) +
               "," + text::format_double(b.cl) + "," + text::format_double(b.cd) + "," + text::format_double(mcl) + "," +
               text::format_double(mcd) + "\n";
        best.points.push_back({static_cast<double>(g.index), g.best_fitness});
        mean.points.push_back({static_cast<double>(g.index), g.mean_fitness});
        cls.points.push_back({static_cast<double>(g.index), mcl});
        cds.points.push_back({static_cast<double>(g.index), 100.0 * mcd});
    }
    write_text(join(a.s.out_dir, "history.csv"), csv);
    score.series = {best, mean};
    coeffs.series = {cls, cds};
    svg::write(score, join(a.s.out_dir, "fitness.svg"));
    svg::write(coeffs, join(a.s.out_dir, "coefficients.svg"));

    std::string z;
    for (Eigen::Index i = 0; i < res.best.z.size(); ++i) z += text::format_double(res.best.z[i]) + "\n";
    write_text(join(a.s.out_dir, "best_latent.txt"), z);
    if (ckpt) {
        const Eigen::VectorXd row = decode(ckpt->decoder, res.best.z.transpose()).row(0).transpose();
        const auto airfoil = denormalized("optimized", row, ckpt->scale, a.s.smooth);
        write_text(join(a.s.out_dir, "best.dat"), write_selig(airfoil));
        svg::Plot p;
        p.title = "Optimized airfoil";
        p.equal_aspect = true;
        p.series.push_back(svg::outline(airfoil));
        svg::write(p, join(a.s.out_dir, "best.svg"));
    }
    std::cout << "best fitness " << text::format_double(*res.best.fitness) << " (generation " << res.best_generation
              << ", cl " << text::format_double(res.best.cl) << ", cd " << text::format_double(res.best.cd) << ")\n";
    return 0;
}

void add_shared(CLI::App* app, Shared& s, bool dataset, bool checkpoint, bool out_dir) {
    if (dataset) app->add_option("--dataset", s.dataset, "Dataset file from `preprocess`")->capture_default_str();
    if (checkpoint) app->add_option("--checkpoint", s.checkpoint, "Model checkpoint")->capture_default_str();
    if (out_dir) app->add_option("--out-dir", s.out_dir, "Output directory")->capture_default_str();
    app->add_option("--seed", s.seed, "Random seed")->capture_default_str();
    app->add_flag("--smooth", s.smooth, "Savitzky-Golay (7, 2) smoothing of generated surfaces");
}

void add_flow(CLI::App* app, FlowConditions& c, XfoilOptions& x) {
    app->add_option("--reynolds", c.reynolds, "Reynolds number")->capture_default_str();
    app->add_option("--mach", c.mach, "Mach number")->capture_default_str();
    app->add_option("--alpha", c.alpha, "Angle of attack in degrees")->capture_default_str();
    app->add_option("--xfoil", x.executable, "XFoil executable (default: $FOILGEN_XFOIL or xfoil on PATH)");
    app->add_option("--xfoil-timeout", x.timeout_s, "Seconds per XFoil case")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Airfoil generation, evaluation and latent-space optimization"};
    app.require_subcommand(1);

    PreprocessArgs pre;
    auto* c_pre = app.add_subcommand("preprocess", "Build a normalized dataset from a directory of .dat files");
    c_pre->add_option("--input", pre.input, "Directory of coordinate files")->required();
    c_pre->add_option("--output", pre.output, "Dataset file to write")->capture_default_str();

    TrainArgs tr;
    auto* c_tr = app.add_subcommand("train", "Train a VAEGAN (or VAE) on a dataset");
    c_tr->add_option("--dataset", tr.dataset)->capture_default_str();
    c_tr->add_option("--output", tr.output, "Checkpoint to write")->capture_default_str();
    c_tr->add_option("--log", tr.log, "Per-epoch CSV log")->capture_default_str();
    c_tr->add_option("--model", tr.model)->check(CLI::IsMember({"vaegan", "vae"}))->capture_default_str();
    c_tr->add_option("--epochs", tr.config.epochs)->capture_default_str();
    c_tr->add_option("--batch-size", tr.config.batch_size)->capture_default_str();
    c_tr->add_option("--lr", tr.config.lr_initial)->capture_default_str();
    c_tr->add_option("--lr-after-decay", tr.config.lr_after_decay)->capture_default_str();
    c_tr->add_option("--decay-epoch", tr.config.decay_epoch)->capture_default_str();
    c_tr->add_option("--lambda-prior", tr.config.lambda_prior)->capture_default_str();
    c_tr->add_option("--lambda-layer", tr.config.lambda_layer)->capture_default_str();
    c_tr->add_option("--lambda-recon", tr.config.lambda_recon)->capture_default_str();
    c_tr->add_option("--lambda-gan", tr.config.lambda_gan_dec)->capture_default_str();
    c_tr->add_option("--seed", tr.config.seed)->capture_default_str();

    SynthArgs sy;
    auto* c_sy = app.add_subcommand("synthesize", "Reconstruct, interpolate, extrapolate or sample airfoils");
    add_shared(c_sy, sy.s, true, true, true);
    c_sy->add_option("--mode", sy.mode)->check(CLI::IsMember({"reconstruct", "interpolate", "extrapolate", "sample"}))->capture_default_str();
    c_sy->add_option("--names", sy.names, "Dataset airfoil names")->delimiter(',');
    c_sy->add_option("--nu", sy.nu, "Pair weight (default 0.5, or 2 for extrapolate)");
    c_sy->add_option("--coeffs", sy.coeffs, "Triplet weights a,b,c summing to 1")->delimiter(',');
    c_sy->add_option("--count", sy.count, "Number of samples")->capture_default_str();

    ClusterArgs cl;
    auto* c_cl = app.add_subcommand("cluster", "K-means over latent codes of the dataset");
    add_shared(c_cl, cl.s, true, true, true);
    c_cl->add_option("--k", cl.k)->capture_default_str();

    FidArgs fd;
    auto* c_fd = app.add_subcommand("fid", "Frechet distance of generated samples to the dataset");
    add_shared(c_fd, fd.s, true, true, false);
    c_fd->add_option("--features-from", fd.features_from, "Checkpoint whose discriminator supplies features");
    c_fd->add_option("--samples", fd.samples, "Generated sample count (default: dataset size)");
    c_fd->add_flag("--real-vs-real", fd.real_vs_real, "Compare the dataset with itself");

    EvalArgs ev;
    auto* c_ev = app.add_subcommand("eval", "Lift and drag of generated and dataset airfoils");
    add_shared(c_ev, ev.s, true, true, true);
    c_ev->add_option("--evaluator", ev.evaluator)->check(CLI::IsMember({"auto", "panel", "xfoil"}))->capture_default_str();
    c_ev->add_option("--samples", ev.samples, "Generated airfoils to evaluate")->capture_default_str();
    c_ev->add_option("--real", ev.real, "Dataset airfoils to evaluate")->capture_default_str();
    add_flow(c_ev, ev.cond, ev.xfoil);

    OptimizeArgs op;
    auto* c_op = app.add_subcommand("optimize", "Genetic search in latent space for target coefficients");
    add_shared(c_op, op.s, false, true, true);
    c_op->add_option("--evaluator", op.evaluator)->check(CLI::IsMember({"auto", "panel", "xfoil", "surrogate"}))->capture_default_str();
    c_op->add_option("--generations", op.ga.generations)->capture_default_str();
    c_op->add_option("--population", op.ga.population)->capture_default_str();
    c_op->add_option("--mutation-p", op.ga.mutation_probability)->capture_default_str();
    c_op->add_option("--mutation-sigma", op.ga.mutation_scale)->capture_default_str();
    c_op->add_option("--tournament", op.ga.tournament_size)->capture_default_str();
    c_op->add_option("--elitism", op.ga.elitism_count)->capture_default_str();
    c_op->add_option("--cl-target", op.ga.targets.cl_target)->capture_default_str();
    c_op->add_option("--cd-target", op.ga.targets.cd_target)->capture_default_str();
    c_op->add_option("--parallelism", op.ga.parallelism)->capture_default_str();
    add_flow(c_op, op.cond, op.xfoil);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (c_pre->parsed()) return cmd_preprocess(pre);
        if (c_tr->parsed()) return cmd_train(tr);
        if (c_sy->parsed()) {
            sy.nu_set = c_sy->count("--nu") > 0;
            return cmd_synthesize(sy);
        }
        if (c_cl->parsed()) return cmd_cluster(cl);
        if (c_fd->parsed()) return cmd_fid(fd);
        if (c_ev->parsed()) return cmd_eval(ev);
        if (c_op->parsed()) return cmd_optimize(op);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
