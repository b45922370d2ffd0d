#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "eqcl/nn.hpp"
#include "eqcl/signal.hpp"

namespace eqcl {

enum class FinetuneMode { LinearEval, SslFinetune };

std::string_view finetune_mode_name(FinetuneMode m);
FinetuneMode parse_finetune_mode(std::string_view s);

struct FinetuneConfig {
    FinetuneMode mode = FinetuneMode::SslFinetune;
    double label_fraction = 1.0;
    bool freeze_encoder = false;  // forced on by LinearEval
    double lr = 5e-4;
    int epochs = 60;
    std::size_t batch_size = 128;
    std::uint64_t seed = 1;
    std::string source_checkpoint;  // empty: random init

    void validate() const;
    bool frozen() const { return mode == FinetuneMode::LinearEval || freeze_encoder; }
};

struct EvalReport {
    double overall_accuracy = 0.0;
    std::map<double, double> per_snr;              // snr_db -> accuracy
    std::map<double, std::uint64_t> per_snr_count;
    std::map<int, double> per_class;               // classes with test samples only
    std::vector<std::vector<std::uint64_t>> confusion;  // [true][predicted]
    std::vector<std::string> class_names;
    std::uint64_t total = 0;
    std::string config_hash;
};

// Class-balanced subset: ceil(fraction * n_c) records of every class c drawn
// uniformly without replacement, returned in dataset order. Throws
// InfeasibleFraction if fraction * n_c < 1 for some class.
std::vector<IqSignal> sample_label_fraction(const std::vector<IqSignal>& dataset, double fraction,
                                            std::uint64_t seed);

struct CrossEntropy {
    double loss = 0.0;
    Tensor grad_logits;
};

// -log softmax(logits)[label].
CrossEntropy softmax_cross_entropy(const Tensor& logits, int label);

// Spec of the downstream model: raw encoder + linear classifier.
ModelSpec classifier_model_spec(const ModelSpec& base, int num_classes);

// Fresh classifier model. The raw encoder is copied from `checkpoint` when
// given (shapes checked against spec) and randomly initialized otherwise.
ModelParams classifier_params(const ModelParams* checkpoint, const ModelSpec& spec, int num_classes,
                              std::uint64_t seed);

std::vector<Tensor> encoder_inputs(const std::vector<IqSignal>& data);

// Mean cross-entropy of a batch; accumulates gradients into grads when given.
// With freeze_encoder only the classifier receives gradients.
double classifier_batch_loss(const ModelSpec& spec, const ModelParams& params, const std::vector<Tensor>& inputs,
                             const std::vector<int>& labels, bool freeze_encoder, GradMap* grads);

std::vector<int> predict(const ModelSpec& spec, const ModelParams& params, const std::vector<Tensor>& inputs);

// Argmax classification report; ties go to the lowest class index.
EvalReport evaluate(const ModelSpec& spec, const ModelParams& params, const std::vector<IqSignal>& test,
                    int num_classes);
EvalReport build_report(const std::vector<IqSignal>& test, const std::vector<int>& predicted, int num_classes);

struct FinetuneResult {
    ModelParams params;
    EvalReport report;
};

// Trains the raw encoder + fresh linear classifier on `labeled` with Adam at a
// constant learning rate and reports on `test`. `checkpoint` may be null.
FinetuneResult finetune(const ModelParams* checkpoint, const std::vector<IqSignal>& labeled,
                        const std::vector<IqSignal>& test, const FinetuneConfig& cfg, const ModelSpec& spec,
                        int num_classes);

enum class LengthAdapter { None, CropPad };

// Centre-crop or zero-pad every record to `length`.
std::vector<IqSignal> adapt_length(const std::vector<IqSignal>& data, std::size_t length);

struct TransferResult {
    EvalReport linear_eval;
    EvalReport ssl;
};

// Linear evaluation and few-label fine-tuning of a source checkpoint on a
// target dataset. Records whose length differs from source_length are
// adapted when the adapter allows it and rejected with ShapeError otherwise.
TransferResult transfer_eval(const ModelParams& source, std::size_t source_length,
                             const std::vector<IqSignal>& target_train, const std::vector<IqSignal>& target_test,
                             const FinetuneConfig& le_cfg, const FinetuneConfig& ssl_cfg, const ModelSpec& spec,
                             int num_classes, LengthAdapter adapter);

// Joins several datasets for multi-source pretraining; ids are renumbered.
std::vector<IqSignal> concat_datasets(const std::vector<std::vector<IqSignal>>& parts);

}  // namespace eqcl
