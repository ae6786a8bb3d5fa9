#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "foilgen/aero.hpp"
#include "foilgen/error.hpp"
#include "foilgen/latent.hpp"

namespace foilgen {

struct GaConfig {
    int generations = 60;
    int population = 25;
    double mutation_probability = 0.3;
    double mutation_scale = 0.2;
    int tournament_size = 2;
    int elitism_count = 1;
    int latent_dim = kLatentDim;
    std::uint64_t seed = 0;
    FitnessTargets targets;
    unsigned parallelism = 1;

    void validate() const {
        if (generations < 1) throw Error(Errc::ConfigInvalid, "generations must be >= 1");
        if (population < 2) throw Error(Errc::ConfigInvalid, "population must be >= 2");
        if (!(mutation_probability >= 0.0 && mutation_probability <= 1.0))
            throw Error(Errc::ConfigInvalid, "mutation probability must lie in [0, 1]");
        if (!(mutation_scale > 0.0)) throw Error(Errc::ConfigInvalid, "mutation scale must be positive");
        if (tournament_size < 1) throw Error(Errc::ConfigInvalid, "tournament size must be >= 1");
        if (elitism_count < 0 || elitism_count >= population)
            throw Error(Errc::ConfigInvalid, "elitism count must lie in [0, population)");
        if (latent_dim < 2) throw Error(Errc::ConfigInvalid, "latent dimension must be >= 2");
        if (parallelism < 1) throw Error(Errc::ConfigInvalid, "parallelism must be >= 1");
        validate_targets(targets);
    }
};

struct Individual {
    LatentVector z;
    std::optional<double> fitness;
    double cl = 0.0;
    double cd = 0.0;
    bool converged = false;
};

struct GenerationRecord {
    int index = 0;
    std::vector<Individual> individuals;
    double best_fitness = 0.0;
    double mean_fitness = 0.0;
    std::size_t best_index = 0;
};

struct GaResult {
    Individual best;
    int best_generation = 0;
    std::vector<GenerationRecord> history;
};

/// Maps a latent vector to aerodynamic coefficients.
using LatentEvaluator = std::function<AeroResult(const LatentVector&)>;

/// cl on target and cd = cd_t (1 + |z|), so fitness is exactly -|z|^2.
inline LatentEvaluator surrogate_evaluator(const FitnessTargets& t) {
    validate_targets(t);
    return [t](const LatentVector& z) { return AeroResult{t.cl_target, t.cd_target * (1.0 + z.norm()), true, AeroSource::Surrogate}; };
}

/// Decodes, denormalizes with `scale` and hands the airfoil to `eval`.
inline LatentEvaluator decoder_evaluator(const Decoder& dec, double scale, AirfoilEvaluator eval) {
    return [&dec, scale, eval = std::move(eval), grid = cosine_grid(kSurfacePoints)](const LatentVector& z) {
        const Matrix row = decode(dec, z.transpose());
        return eval(to_airfoil("candidate", row.row(0).transpose(), scale, grid));
    };
}

/// splitmix64 finalizer over (seed, generation, index).
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t generation, std::uint64_t index) {
    auto mix = [](std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    };
    return mix(mix(mix(seed) ^ generation) ^ index);
}

/// Best of `size` uniform draws with replacement; ties go to the lower index.
inline std::size_t tournament_select(const std::vector<Individual>& pop, std::mt19937_64& rng, int size = 2) {
    if (pop.empty()) throw Error(Errc::ConfigInvalid, "empty population");
    for (std::size_t i = 0; i < pop.size(); ++i)
        if (!pop[i].fitness) throw Error(Errc::Unevaluated, "individual " + std::to_string(i) + " has no fitness");
    std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
    std::size_t best = pick(rng);
    for (int t = 1; t < size; ++t) {
        const std::size_t c = pick(rng);
        if (*pop[c].fitness > *pop[best].fitness || (*pop[c].fitness == *pop[best].fitness && c < best)) best = c;
    }
    return best;
}

/// Cut k uniform in [1, d-1]; tails after k are swapped.
inline std::pair<LatentVector, LatentVector> crossover_single_point(const LatentVector& p1, const LatentVector& p2,
                                                                    std::mt19937_64& rng) {
    if (p1.size() != p2.size()) throw Error(Errc::DimensionMismatch, "parents differ in dimension");
    const auto d = p1.size();
    if (d < 2) throw Error(Errc::DimensionMismatch, "crossover needs at least 2 dimensions");
    std::uniform_int_distribution<Eigen::Index> cut(1, d - 1);
    const auto k = cut(rng);
    LatentVector c1 = p1, c2 = p2;
    c1.tail(d - k) = p2.tail(d - k);
    c2.tail(d - k) = p1.tail(d - k);
    return {c1, c2};
}

/// With probability p, adds sigma * N(0, I); otherwise returns z.
inline LatentVector mutate(const LatentVector& z, double p, double sigma, std::mt19937_64& rng) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::ConfigInvalid, "mutation probability must lie in [0, 1]");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (!(u(rng) < p)) return z;
    std::normal_distribution<double> n01(0.0, 1.0);
    LatentVector out = z;
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += sigma * n01(rng);
    return out;
}

namespace detail {

inline void evaluate_population(std::vector<Individual>& pop, const LatentEvaluator& eval, const FitnessTargets& t,
                                unsigned parallelism) {
    auto one = [&](std::size_t i) {
        auto& ind = pop[i];
        if (ind.fitness) return;  // elites carry their score
        AeroResult r;
        try {
            r = eval(ind.z);
        } catch (const Error&) {
            r = AeroResult{};
        }
        ind.cl = r.cl;
        ind.cd = r.cd;
        ind.converged = r.converged;
        ind.fitness = fitness(r, t);
    };
    const unsigned workers = std::min<unsigned>(parallelism, static_cast<unsigned>(pop.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < pop.size(); ++i) one(i);
        return;
    }
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w)
        threads.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < pop.size(); i += workers) one(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& th : threads) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline GenerationRecord summarize(int index, std::vector<Individual> pop) {
    GenerationRecord g;
    g.index = index;
    double sum = 0.0;
    g.best_fitness = *pop[0].fitness;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        sum += *pop[i].fitness;
        if (*pop[i].fitness > g.best_fitness) {
            g.best_fitness = *pop[i].fitness;
            g.best_index = i;
        }
    }
    g.mean_fitness = sum / static_cast<double>(pop.size());
    g.individuals = std::move(pop);
    return g;
}

}  // namespace detail

/// Genetic search over latent vectors. Selection, crossover and mutation for
/// offspring slot j of generation g draw from a stream seeded by
/// (seed, g, j), so results do not depend on evaluation parallelism.
inline GaResult run_ga(const GaConfig& cfg, const LatentEvaluator& eval) {
    cfg.validate();
    const auto m = static_cast<std::size_t>(cfg.population);
    std::vector<Individual> pop(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::mt19937_64 rng(stream_seed(cfg.seed, 0, i));
        pop[i].z = standard_normal(cfg.latent_dim, 1, rng);
    }

    GaResult res;
    for (int gen = 0; gen < cfg.generations; ++gen) {
        detail::evaluate_population(pop, eval, cfg.targets, cfg.parallelism);
        bool any = false;
        for (const auto& ind : pop) any = any || ind.converged;
        if (!any) throw Error(Errc::EvaluatorFailure, "every individual failed in generation " + std::to_string(gen));

        res.history.push_back(detail::summarize(gen, pop));
        const auto& rec = res.history.back();
        if (gen == 0 || rec.best_fitness > *res.best.fitness) {
            res.best = rec.individuals[rec.best_index];
            res.best_generation = gen;
        }
        if (gen + 1 == cfg.generations) break;

        // Elites first, in fitness order (stable on index).
        std::vector<std::size_t> order(m);
        for (std::size_t i = 0; i < m; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return *pop[a].fitness > *pop[b].fitness; });
        std::vector<Individual> next;
        next.reserve(m);
        for (int e = 0; e < cfg.elitism_count; ++e) next.push_back(pop[order[static_cast<std::size_t>(e)]]);

        for (std::size_t slot = next.size(); slot < m; slot += 2) {
            std::mt19937_64 rng(stream_seed(cfg.seed, static_cast<std::uint64_t>(gen + 1), slot));
            const auto a = tournament_select(pop, rng, cfg.tournament_size);
            const auto b = tournament_select(pop, rng, cfg.tournament_size);
            auto [c1, c2] = crossover_single_point(pop[a].z, pop[b].z, rng);
            Individual k1, k2;
            k1.z = mutate(c1, cfg.mutation_probability, cfg.mutation_scale, rng);
            k2.z = mutate(c2, cfg.mutation_probability, cfg.mutation_scale, rng);
            next.push_back(std::move(k1));
            if (next.size() < m) next.push_back(std::move(k2));
        }
        pop = std::move(next);
    }
    return res;
}

}  // namespace foilgen
