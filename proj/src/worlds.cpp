#include "cascadelab/worlds.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cascadelab/parallel.hpp"

namespace cascadelab {

Dataset SyntheticWorld::sample(std::size_t n, RngSeed seed) const {
    if (n < 1) throw ConfigError("sample: n must be >= 1");
    // One child stream per example: the dataset is identical however the
    // loop is split across threads.
    std::vector<LabeledExample> examples(n);
    parallel_for(n, [&](std::size_t i) {
        Rng rng(derive_seed(seed, i));
        LabeledExample ex;
        ex.x = sample_instance(rng);
        const ProbVector eta = posterior(ex.x);
        ex.y = static_cast<int>(rng.next_weighted(eta.values()));
        examples[i] = std::move(ex);
    });
    return Dataset(std::move(examples), num_classes());
}

// ---------------------------------------------------------------------------
// DiscreteWorld

DiscreteWorld::DiscreteWorld(std::vector<SupportPoint> support) : support_(std::move(support)) {
    if (support_.empty()) throw ConfigError("discrete world needs a nonempty support");
    num_classes_ = static_cast<int>(support_.front().posterior.num_classes());
    const std::size_t d = support_.front().x.size();
    double total = 0.0;
    for (const auto& pt : support_) {
        if (pt.x.size() != d) throw ShapeError("discrete world support dims differ");
        if (static_cast<int>(pt.posterior.num_classes()) != num_classes_) {
            throw ShapeError("discrete world posteriors disagree on class count");
        }
        if (pt.prob < 0.0) throw InvalidDistributionError("negative support mass");
        total += pt.prob;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw InvalidDistributionError("discrete world marginals sum to " + std::to_string(total));
    }
}

ProbVector DiscreteWorld::posterior(const std::vector<double>& x) const {
    for (const auto& pt : support_) {
        if (pt.x == x) return pt.posterior;
    }
    throw OutOfSupportError("instance not in discrete world support");
}

ProbVector DiscreteWorld::class_marginals() const {
    std::vector<double> marg(static_cast<std::size_t>(num_classes_), 0.0);
    for (const auto& pt : support_) {
        for (int y = 0; y < num_classes_; ++y) {
            marg[static_cast<std::size_t>(y)] += pt.prob * pt.posterior[static_cast<std::size_t>(y)];
        }
    }
    return normalize(marg);
}

std::vector<double> DiscreteWorld::sample_instance(Rng& rng) const {
    std::vector<double> weights;
    weights.reserve(support_.size());
    for (const auto& pt : support_) weights.push_back(pt.prob);
    return support_[rng.next_weighted(weights)].x;
}

// ---------------------------------------------------------------------------
// GaussianMixtureWorld

GaussianMixtureWorld::GaussianMixtureWorld(std::vector<Component> components)
    : components_(std::move(components)) {
    if (components_.size() < 2) throw ConfigError("gaussian mixture needs >= 2 classes");
    const std::size_t d = components_.front().mean.size();
    double total = 0.0;
    for (const auto& c : components_) {
        if (c.mean.size() != d) throw ShapeError("gaussian mixture mean dims differ");
        if (!(c.stddev > 0.0)) throw InvalidDistributionError("gaussian stddev must be > 0");
        if (c.prior < 0.0) throw InvalidDistributionError("negative class prior");
        total += c.prior;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw InvalidDistributionError("gaussian mixture priors sum to " + std::to_string(total));
    }
}

ProbVector GaussianMixtureWorld::posterior(const std::vector<double>& x) const {
    if (x.size() != dim()) throw ShapeError("posterior: instance dim mismatch");
    const std::size_t k = components_.size();
    std::vector<double> log_joint(k);
    for (std::size_t c = 0; c < k; ++c) {
        const auto& comp = components_[c];
        double sq = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double diff = x[j] - comp.mean[j];
            sq += diff * diff;
        }
        const double var = comp.stddev * comp.stddev;
        log_joint[c] = std::log(comp.prior > 0.0 ? comp.prior : 1e-300) -
                       0.5 * sq / var -
                       static_cast<double>(x.size()) * std::log(comp.stddev);
    }
    const double peak = *std::max_element(log_joint.begin(), log_joint.end());
    std::vector<double> weights(k);
    for (std::size_t c = 0; c < k; ++c) weights[c] = std::exp(log_joint[c] - peak);
    return normalize(weights);
}

ProbVector GaussianMixtureWorld::class_marginals() const {
    std::vector<double> priors;
    priors.reserve(components_.size());
    for (const auto& c : components_) priors.push_back(c.prior);
    return normalize(priors);
}

std::vector<double> GaussianMixtureWorld::sample_instance(Rng& rng) const {
    std::vector<double> priors;
    priors.reserve(components_.size());
    for (const auto& c : components_) priors.push_back(c.prior);
    const auto& comp = components_[rng.next_weighted(priors)];
    std::vector<double> x(comp.mean);
    for (double& v : x) v += comp.stddev * rng.next_gaussian();
    return x;
}

// ---------------------------------------------------------------------------
// Transforms

Dataset apply_label_noise(const Dataset& ds, const LabelNoiseTransform& t, RngSeed seed) {
    const int L = ds.num_classes();
    if (t.flip_prob < 0.0 || t.flip_prob > 1.0) {
        throw ConfigError("label-noise flip probability must be in [0,1]");
    }
    std::vector<bool> noisy(static_cast<std::size_t>(L), false);
    for (int c : t.noisy_classes) {
        if (c < 0 || c >= L) {
            throw ConfigError("label-noise class " + std::to_string(c) + " outside [0, " +
                              std::to_string(L) + ")");
        }
        noisy[static_cast<std::size_t>(c)] = true;
    }
    Rng rng(seed);
    std::vector<LabeledExample> out(ds.examples());
    for (auto& ex : out) {
        if (noisy[static_cast<std::size_t>(ex.y)] && rng.bernoulli(t.flip_prob)) {
            ex.y = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(L)));
        }
    }
    return Dataset(std::move(out), L);
}

SubgroupPredicate make_specialist_world(std::shared_ptr<const SyntheticWorld> base,
                                        const SpecialistSplitTransform& t) {
    const int L = base->num_classes();
    std::vector<bool> mask(static_cast<std::size_t>(L), false);
    int count = 0;
    for (int c : t.good_classes) {
        if (c < 0 || c >= L) {
            throw ConfigError("specialist class " + std::to_string(c) + " outside [0, " +
                              std::to_string(L) + ")");
        }
        if (!mask[static_cast<std::size_t>(c)]) {
            mask[static_cast<std::size_t>(c)] = true;
            ++count;
        }
    }
    if (count == 0 || count == L) {
        throw ConfigError("specialist sub-group must be a nonempty proper subset of classes");
    }
    return SubgroupPredicate(std::move(base), std::move(mask));
}

std::shared_ptr<const SyntheticWorld> apply_long_tail(const SyntheticWorld& world,
                                                      const LongTailTransform& t) {
    const int L = world.num_classes();
    if (t.head_classes < 0 || t.head_classes >= L) {
        throw ConfigError("long-tail head count must be in [0, L)");
    }
    if (!(t.head_weight > 0.0) || !(t.tail_weight > 0.0)) {
        throw ConfigError("long-tail weights must be positive");
    }
    const auto weight_of = [&](int c) {
        return c < t.head_classes ? t.head_weight : t.tail_weight;
    };

    if (const auto* gw = dynamic_cast<const GaussianMixtureWorld*>(&world)) {
        auto components = gw->components();
        double total = 0.0;
        for (int c = 0; c < L; ++c) {
            components[static_cast<std::size_t>(c)].prior *= weight_of(c);
            total += components[static_cast<std::size_t>(c)].prior;
        }
        for (auto& comp : components) comp.prior /= total;
        return std::make_shared<GaussianMixtureWorld>(std::move(components));
    }
    if (const auto* dw = world.as_discrete()) {
        // Reweight the joint q(x,y) = Pr(x) * eta_y(x) by the class weight;
        // Pr(x|y) is preserved exactly.
        std::vector<DiscreteWorld::SupportPoint> support;
        double total = 0.0;
        for (const auto& pt : dw->support()) {
            double point_mass = 0.0;
            std::vector<double> joint(static_cast<std::size_t>(L));
            for (int y = 0; y < L; ++y) {
                joint[static_cast<std::size_t>(y)] =
                    pt.prob * pt.posterior[static_cast<std::size_t>(y)] * weight_of(y);
                point_mass += joint[static_cast<std::size_t>(y)];
            }
            support.push_back({pt.x, point_mass, normalize(joint)});
            total += point_mass;
        }
        for (auto& pt : support) pt.prob /= total;
        return std::make_shared<DiscreteWorld>(std::move(support));
    }
    throw ConfigError("long-tail transform: unsupported world kind");
}

}  // namespace cascadelab
