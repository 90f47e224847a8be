#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "pad8/classifier.hpp"
#include "pad8/model.hpp"
#include "pad8/prompts.hpp"

#include "json.hpp"

namespace pad8 {

enum class Split { Train, Test };
enum class LabelScheme { ClassIndex, Binary };

struct ManifestEntry {
    std::string path;        // resolved against the manifest's directory
    int class_index = -1;    // [0,8) for class-labeled manifests, -1 for binary
    bool is_real = false;
    Split split = Split::Test;
};

struct Manifest {
    LabelScheme scheme = LabelScheme::ClassIndex;
    std::vector<ManifestEntry> entries;
};

// CSV rows `path,label,split`; label is 0..7 or real|fake, one scheme per file
Manifest load_manifest(const std::string& path);

// detection counts for one group: U = R/Q
struct RateRow {
    long q = 0;  // group size
    long r = 0;  // passed (positives) or rejected (negatives)

    double u_percent() const { return q ? 100.0 * r / q : 0.0; }
    // half-up, two decimals, computed in exact integer arithmetic
    std::string u_string() const;
};

struct EvalReport {
    // class-labeled manifests only: per class, R counts pass for the real
    // class and reject for attack classes
    std::vector<std::pair<int, RateRow>> per_class;
    std::optional<RateRow> real_row;
    std::optional<RateRow> fake_row;
    std::string prompt_set_id;
    uint64_t prompt_digest = 0;
    std::string checkpoint_id;
    long evaluated = 0;
    std::vector<std::string> missing;  // files that failed to load
    std::array<long, 8> predicted_counts{};  // distribution of predicted classes

    // fraction of all predictions landing on the most common predicted class
    double modal_class_fraction() const;
    // mean per-class U over classes with samples
    double mean_per_class_u() const;
};

struct EvalLabel {
    bool is_real = false;
    int class_index = -1;  // -1 for binary-labeled data
};

// Eq.-9-style rates: positives count passes, negatives count rejections.
// Empty groups are omitted with a warning rather than divided by zero.
EvalReport detection_rate(const std::vector<LivenessVerdict>& verdicts,
                          const std::vector<EvalLabel>& labels, int real_index);

// classify the requested split of the manifest, then score it
EvalReport evaluate(const Manifest& manifest, const Model& model, const PromptSet& prompts,
                    Split split = Split::Test, const std::string& checkpoint_id = "");

std::string render_report(const EvalReport& report);
nlohmann::json report_to_json(const EvalReport& report);

struct AblationResult {
    EvalReport descriptive;
    EvalReport numeric;
    std::array<double, 8> delta_u{};  // descriptive minus numeric, per class
};

// evaluates the same checkpoint twice: with the training prompts and with
// the numeric labels "1".."8"; reports both plus per-class deltas
AblationResult ablation_numeric_prompts(const Manifest& manifest, const Model& model,
                                        const PromptSet& training_prompts, Split split = Split::Test,
                                        const std::string& checkpoint_id = "");

std::string render_ablation(const AblationResult& ab);

}  // namespace pad8
