#include "pad8/eval.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;

namespace pad8 {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(c));
    return s;
}

}  // namespace

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    const fs::path base = fs::path(path).parent_path();

    Manifest m;
    bool scheme_set = false;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string row = trim(line);
        if (row.empty()) continue;
        if (line_no == 1 && lower(row) == "path,label,split") continue;  // header

        std::stringstream ss(row);
        std::string p, label, split;
        if (!std::getline(ss, p, ',') || !std::getline(ss, label, ',') || !std::getline(ss, split)) {
            throw IoError("manifest " + path + " line " + std::to_string(line_no) +
                          ": expected `path,label,split`");
        }
        p = trim(p);
        label = lower(trim(label));
        split = lower(trim(split));
        if (p.empty()) throw IoError("manifest " + path + " line " + std::to_string(line_no) + ": empty path");

        ManifestEntry e;
        e.path = fs::path(p).is_absolute() ? p : (base / p).string();
        if (split == "train") {
            e.split = Split::Train;
        } else if (split == "test") {
            e.split = Split::Test;
        } else {
            throw IoError("manifest " + path + " line " + std::to_string(line_no) + ": bad split `" +
                          split + "`");
        }

        LabelScheme scheme;
        if (label == "real" || label == "fake") {
            scheme = LabelScheme::Binary;
            e.is_real = label == "real";
            e.class_index = -1;
        } else if (label.size() == 1 && label[0] >= '0' && label[0] <= '7') {
            scheme = LabelScheme::ClassIndex;
            e.class_index = label[0] - '0';
            e.is_real = false;  // fixed up against the prompt set at evaluation time
        } else {
            throw IoError("manifest " + path + " line " + std::to_string(line_no) + ": bad label `" +
                          label + "` (expected 0..7 or real|fake)");
        }
        if (!scheme_set) {
            m.scheme = scheme;
            scheme_set = true;
        } else if (m.scheme != scheme) {
            throw IoError("manifest " + path + " line " + std::to_string(line_no) +
                          ": mixes class and real/fake labels");
        }
        m.entries.push_back(std::move(e));
    }
    if (m.entries.empty()) throw IoError("manifest " + path + " has no entries");
    return m;
}

std::string RateRow::u_string() const {
    if (q == 0) return "n/a";
    // percentage scaled by 100, rounded half-up
    const unsigned long long scaled =
        (static_cast<unsigned long long>(r) * 10000ull + static_cast<unsigned long long>(q) / 2ull) /
        static_cast<unsigned long long>(q);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%llu.%02llu", scaled / 100ull, scaled % 100ull);
    return buf;
}

double EvalReport::modal_class_fraction() const {
    long total = 0, best = 0;
    for (long c : predicted_counts) {
        total += c;
        best = std::max(best, c);
    }
    return total ? static_cast<double>(best) / total : 0.0;
}

double EvalReport::mean_per_class_u() const {
    if (per_class.empty()) return 0.0;
    double sum = 0.0;
    long n = 0;
    for (const auto& [cls, row] : per_class) {
        (void)cls;
        if (row.q > 0) {
            sum += row.u_percent();
            ++n;
        }
    }
    return n ? sum / n : 0.0;
}

EvalReport detection_rate(const std::vector<LivenessVerdict>& verdicts,
                          const std::vector<EvalLabel>& labels, int real_index) {
    if (verdicts.size() != labels.size()) {
        throw ShapeError("detection_rate: " + std::to_string(verdicts.size()) + " verdicts vs " +
                         std::to_string(labels.size()) + " labels");
    }
    if (verdicts.empty()) throw ConfigError("detection_rate: empty evaluation");

    EvalReport rep;
    rep.evaluated = static_cast<long>(verdicts.size());
    const bool class_scheme = labels[0].class_index >= 0;

    RateRow real_row, fake_row;
    std::array<RateRow, 8> class_rows{};
    for (size_t i = 0; i < verdicts.size(); ++i) {
        const auto& v = verdicts[i];
        const auto& l = labels[i];
        rep.predicted_counts[static_cast<size_t>(v.predicted_class)]++;
        const bool sample_real = class_scheme ? l.class_index == real_index : l.is_real;
        if (sample_real) {
            real_row.q++;
            if (v.is_real) real_row.r++;
        } else {
            fake_row.q++;
            if (!v.is_real) fake_row.r++;
        }
        if (class_scheme) {
            auto& row = class_rows[static_cast<size_t>(l.class_index)];
            row.q++;
            // real class counts passes; attack classes count rejections
            if (l.class_index == real_index ? v.is_real : !v.is_real) row.r++;
        }
    }
    if (real_row.q > 0) {
        rep.real_row = real_row;
    } else {
        std::cerr << "warning: no positive (real) samples in evaluation; Real row omitted\n";
    }
    if (fake_row.q > 0) {
        rep.fake_row = fake_row;
    } else {
        std::cerr << "warning: no negative (fake) samples in evaluation; Fake row omitted\n";
    }
    if (class_scheme) {
        for (int k = 0; k < 8; ++k) {
            if (class_rows[static_cast<size_t>(k)].q > 0) {
                rep.per_class.emplace_back(k, class_rows[static_cast<size_t>(k)]);
            }
        }
    }
    return rep;
}

EvalReport evaluate(const Manifest& manifest, const Model& model, const PromptSet& prompts,
                    Split split, const std::string& checkpoint_id) {
    std::vector<const ManifestEntry*> selected;
    for (const auto& e : manifest.entries) {
        if (e.split == split) selected.push_back(&e);
    }
    if (selected.empty()) throw ConfigError("evaluate: manifest has no entries for the requested split");

    std::vector<std::string> paths;
    paths.reserve(selected.size());
    for (const auto* e : selected) paths.push_back(e->path);
    const BatchResult batch = classify_batch(paths, model, prompts);

    std::vector<LivenessVerdict> verdicts;
    std::vector<EvalLabel> labels;
    std::vector<std::string> missing;
    for (size_t i = 0; i < selected.size(); ++i) {
        if (!batch.verdicts[i].has_value()) continue;
        verdicts.push_back(*batch.verdicts[i]);
        EvalLabel l;
        if (manifest.scheme == LabelScheme::ClassIndex) {
            l.class_index = selected[i]->class_index;
            l.is_real = selected[i]->class_index == prompts.real_index();
        } else {
            l.class_index = -1;
            l.is_real = selected[i]->is_real;
        }
        labels.push_back(l);
    }
    for (const auto& f : batch.failures) missing.push_back(paths[f.index] + " (" + f.message + ")");
    if (verdicts.empty()) throw IoError("evaluate: no images could be loaded");

    EvalReport rep = detection_rate(verdicts, labels, prompts.real_index());
    rep.prompt_set_id = prompts.id();
    rep.prompt_digest = prompts.digest();
    rep.checkpoint_id = checkpoint_id;
    rep.missing = std::move(missing);
    return rep;
}

std::string render_report(const EvalReport& rep) {
    std::ostringstream os;
    os << "prompt set: " << rep.prompt_set_id;
    if (!rep.checkpoint_id.empty()) os << "    checkpoint: " << rep.checkpoint_id;
    os << "\n";
    os << "  group     Q       R       U%\n";
    for (const auto& [cls, row] : rep.per_class) {
        os << "  " << PromptSet::class_name(cls) << "     " << row.q << "\t" << row.r << "\t"
           << row.u_string() << "\n";
    }
    if (rep.real_row) {
        os << "  Real    " << rep.real_row->q << "\t" << rep.real_row->r << "\t"
           << rep.real_row->u_string() << "\n";
    }
    if (rep.fake_row) {
        os << "  Fake    " << rep.fake_row->q << "\t" << rep.fake_row->r << "\t"
           << rep.fake_row->u_string() << "\n";
    }
    if (!rep.missing.empty()) {
        os << "  missing files:\n";
        for (const auto& m : rep.missing) os << "    " << m << "\n";
    }
    return os.str();
}

nlohmann::json report_to_json(const EvalReport& rep) {
    nlohmann::json j;
    j["prompt_set_id"] = rep.prompt_set_id;
    j["prompt_digest"] = rep.prompt_digest;
    j["checkpoint_id"] = rep.checkpoint_id;
    j["evaluated"] = rep.evaluated;
    auto row_json = [](const RateRow& r) {
        return nlohmann::json{{"Q", r.q}, {"R", r.r}, {"U", r.u_string()}};
    };
    j["per_class"] = nlohmann::json::array();
    for (const auto& [cls, row] : rep.per_class) {
        auto rj = row_json(row);
        rj["class"] = PromptSet::class_name(cls);
        rj["class_index"] = cls;
        j["per_class"].push_back(rj);
    }
    if (rep.real_row) j["real"] = row_json(*rep.real_row);
    if (rep.fake_row) j["fake"] = row_json(*rep.fake_row);
    j["predicted_counts"] = rep.predicted_counts;
    j["modal_class_fraction"] = rep.modal_class_fraction();
    j["missing"] = rep.missing;
    return j;
}

AblationResult ablation_numeric_prompts(const Manifest& manifest, const Model& model,
                                        const PromptSet& training_prompts, Split split,
                                        const std::string& checkpoint_id) {
    AblationResult ab;
    ab.descriptive = evaluate(manifest, model, training_prompts, split, checkpoint_id);
    PromptSet numeric = PromptSet::numeric();
    ab.numeric = evaluate(manifest, model, numeric, split, checkpoint_id);

    std::array<double, 8> desc_u{}, num_u{};
    for (const auto& [cls, row] : ab.descriptive.per_class) desc_u[static_cast<size_t>(cls)] = row.u_percent();
    for (const auto& [cls, row] : ab.numeric.per_class) num_u[static_cast<size_t>(cls)] = row.u_percent();
    for (int k = 0; k < 8; ++k) ab.delta_u[static_cast<size_t>(k)] = desc_u[static_cast<size_t>(k)] - num_u[static_cast<size_t>(k)];
    return ab;
}

std::string render_ablation(const AblationResult& ab) {
    std::ostringstream os;
    os << "--- descriptive prompts ---\n" << render_report(ab.descriptive);
    os << "--- numeric prompts (1..8) ---\n" << render_report(ab.numeric);
    os << "--- per-class delta (descriptive - numeric, percentage points) ---\n";
    for (int k = 0; k < 8; ++k) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "  %s  %+.2f\n", PromptSet::class_name(k).c_str(),
                      ab.delta_u[static_cast<size_t>(k)]);
        os << buf;
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "mean per-class U: descriptive %.2f vs numeric %.2f\n"
                  "modal-class fraction: descriptive %.3f vs numeric %.3f\n",
                  ab.descriptive.mean_per_class_u(), ab.numeric.mean_per_class_u(),
                  ab.descriptive.modal_class_fraction(), ab.numeric.modal_class_fraction());
    os << buf;
    return os.str();
}

}  // namespace pad8
