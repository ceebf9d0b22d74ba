#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cascadelab/dataset.hpp"
#include "cascadelab/mlp.hpp"
#include "cascadelab/models.hpp"
#include "cascadelab/prob.hpp"

namespace cascadelab {

/// Regression target a deferral score model is trained against.
///
///   diff-01:   1[y == h2(x)] - 1[y == h1(x)], squared-error loss
///   diff-prob: p2_y(x) - p1_y(x),             absolute-error loss
///   maxprob:   max_y' p2_y'(x),               squared-error loss
enum class PosthocTargetKind { kDiff01, kDiffProb, kMaxProb };

std::string to_string(PosthocTargetKind kind);
PosthocTargetKind posthoc_target_from_string(const std::string& name);

/// Feature vector over model 1's probability output, length L + 11:
/// [entropy; top-10 probabilities in descending order, zero-padded when
/// L < 10; one-hot of the argmax].
std::vector<double> extract_features(const ProbVector& p1);

struct PosthocPair {
    std::vector<double> features;
    double target;
};

/// One (features, target) pair per example, in dataset order. The only
/// place model 2 is consulted on behalf of a post-hoc rule.
std::vector<PosthocPair> make_targets(const Dataset& ds, const Classifier& model1,
                                      const Classifier& model2, PosthocTargetKind kind);

/// Deterministic disjoint split; the heldout part carries `fraction` of the
/// examples (rounded). Original example order is preserved inside each part.
std::pair<Dataset, Dataset> validation_split(const Dataset& ds, double fraction, RngSeed seed);

struct PosthocHyperparams {
    std::vector<int> hidden_sizes{64, 16};
    int epochs = 20;
    int batch_size = 128;
    double learning_rate = 7e-4;
    double l2 = 1e-3;
};

/// A trained deferral score model g over model-1 features.
struct PosthocModel {
    MlpModel mlp;
    PosthocTargetKind target_kind = PosthocTargetKind::kDiff01;
    int num_classes = 0;

    double predict(const std::vector<double>& features) const {
        return mlp_forward(mlp, features)[0];
    }
};

struct PosthocTrainResult {
    PosthocModel model;
    std::vector<double> train_loss_curve;
    std::vector<double> heldout_loss_curve;  // empty when no heldout set given
    double final_train_loss = 0.0;
};

/// Adam on the kind's loss with per-epoch Fisher-Yates shuffling derived
/// from `seed`. The absolute-error gradient at zero residual is zero.
PosthocTrainResult train_posthoc(const std::vector<PosthocPair>& pairs,
                                 const PosthocHyperparams& hp, RngSeed seed,
                                 PosthocTargetKind kind, int num_classes,
                                 const std::vector<PosthocPair>* heldout = nullptr);

/// Mean loss of a model over a pair set (squared or absolute per the kind).
double posthoc_loss(const PosthocModel& model, const std::vector<PosthocPair>& pairs);

/// JSON envelope {format_version, target_kind, num_classes, layer_sizes,
/// weights, biases} with parameters base64-encoded as little-endian 64-bit
/// floats; round-trips are bit-exact.
void save_model(const PosthocModel& model, const std::filesystem::path& path);
PosthocModel load_model(const std::filesystem::path& path);

}  // namespace cascadelab
