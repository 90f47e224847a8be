// pad8: eight-category face liveness detection via image-text matching.
// Subcommands map 1:1 onto the library: synth, train, eval, classify,
// ablate, heatmap, attention.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "pad8/checkpoint.hpp"
#include "pad8/classifier.hpp"
#include "pad8/config.hpp"
#include "pad8/eval.hpp"
#include "pad8/synth.hpp"
#include "pad8/trainer.hpp"
#include "pad8/viz.hpp"

using namespace pad8;

namespace {

PromptSet resolve_prompts(const std::string& spec) {
    if (spec == "default") return PromptSet::descriptive_default();
    if (spec == "numeric") return PromptSet::numeric();
    return PromptSet::load_file(spec);
}

std::pair<std::vector<TrainSample>, std::vector<TrainSample>> manifest_samples(const Manifest& m) {
    if (m.scheme != LabelScheme::ClassIndex) {
        throw ConfigError("training requires a class-labeled manifest (labels 0..7)");
    }
    std::vector<TrainSample> train, test;
    for (const auto& e : m.entries) {
        TrainSample s{e.path, e.class_index};
        (e.split == Split::Train ? train : test).push_back(s);
    }
    return {train, test};
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write json report: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pad8: face liveness detection from image-text similarity over eight categories"};
    app.require_subcommand(1);

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate the deterministic synthetic dataset");
    SynthSpec synth_spec;
    std::string synth_out = "data";
    synth_cmd->add_option("--seed", synth_spec.seed, "root seed")->capture_default_str();
    synth_cmd->add_option("--per-class", synth_spec.per_class, "samples per class")->capture_default_str();
    synth_cmd->add_option("--size", synth_spec.image_size, "image side in pixels")->capture_default_str();
    synth_cmd->add_option("--out", synth_out, "output directory")->capture_default_str();

    // train
    auto* train_cmd = app.add_subcommand("train", "train the image encoder against frozen text anchors");
    std::string train_manifest, train_out = "model.c8", train_config, train_prompts = "default";
    std::string train_log;
    uint64_t train_seed = 7;
    int train_epochs = -1, train_batch = -1;
    double train_lr = -1.0;
    bool train_quiet = false;
    train_cmd->add_option("--manifest", train_manifest, "dataset manifest csv")->required();
    train_cmd->add_option("--out", train_out, "checkpoint output path")->capture_default_str();
    train_cmd->add_option("--config", train_config, "key=value config file");
    train_cmd->add_option("--prompts", train_prompts, "default | numeric | prompt file")->capture_default_str();
    train_cmd->add_option("--seed", train_seed, "root seed")->capture_default_str();
    train_cmd->add_option("--epochs", train_epochs, "override epoch count");
    train_cmd->add_option("--batch-size", train_batch, "override batch size");
    train_cmd->add_option("--lr", train_lr, "override initial learning rate");
    train_cmd->add_option("--log", train_log, "append csv run log here");
    train_cmd->add_flag("--quiet", train_quiet, "suppress per-epoch progress");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "detection-rate report over a manifest");
    std::string eval_ck, eval_manifest, eval_prompts = "default", eval_json, eval_split = "test";
    eval_cmd->add_option("--checkpoint", eval_ck, "trained checkpoint")->required();
    eval_cmd->add_option("--manifest", eval_manifest, "dataset manifest csv")->required();
    eval_cmd->add_option("--prompts", eval_prompts, "default | numeric | prompt file")->capture_default_str();
    eval_cmd->add_option("--json", eval_json, "also write a machine-readable report");
    eval_cmd->add_option("--split", eval_split, "train | test")->capture_default_str();

    // classify
    auto* classify_cmd = app.add_subcommand("classify", "classify images, one json verdict per line");
    std::string cls_ck, cls_prompts = "default";
    std::vector<std::string> cls_images;
    classify_cmd->add_option("--checkpoint", cls_ck, "trained checkpoint")->required();
    classify_cmd->add_option("--image", cls_images, "image path (repeatable)")->required();
    classify_cmd->add_option("--prompts", cls_prompts, "default | numeric | prompt file")->capture_default_str();

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "descriptive vs numeric prompt comparison");
    std::string abl_ck, abl_manifest, abl_prompts = "default", abl_json;
    ablate_cmd->add_option("--checkpoint", abl_ck, "trained checkpoint")->required();
    ablate_cmd->add_option("--manifest", abl_manifest, "dataset manifest csv")->required();
    ablate_cmd->add_option("--prompts", abl_prompts, "prompts the checkpoint was trained with")->capture_default_str();
    ablate_cmd->add_option("--json", abl_json, "also write a machine-readable report");

    // heatmap
    auto* heat_cmd = app.add_subcommand("heatmap", "visual-language saliency overlay");
    std::string heat_ck, heat_image, heat_text, heat_out = "heatmap.ppm";
    HeatmapOptions heat_opts;
    heat_cmd->add_option("--checkpoint", heat_ck, "trained checkpoint")->required();
    heat_cmd->add_option("--image", heat_image, "input image")->required();
    heat_cmd->add_option("--text", heat_text, "query text")->required();
    heat_cmd->add_option("--out", heat_out, "overlay output (ppm)")->capture_default_str();
    heat_cmd->add_option("--window", heat_opts.window_frac, "window as fraction of min side")->capture_default_str();
    heat_cmd->add_option("--stride", heat_opts.stride_frac, "stride as fraction of window")->capture_default_str();
    heat_cmd->add_option("--alpha", heat_opts.alpha, "overlay blend weight")->capture_default_str();
    heat_cmd->add_option("--random-crops", heat_opts.random_crops, "use N seeded random crops instead of the grid");
    heat_cmd->add_option("--seed", heat_opts.seed, "seed for random-crop mode")->capture_default_str();
    heat_cmd->add_option("--csv", heat_opts.csv_path, "dump per-window similarities");

    // attention
    auto* attn_cmd = app.add_subcommand("attention", "final-block self-attention overlay");
    std::string attn_ck, attn_image, attn_out = "attention.ppm";
    double attn_alpha = 0.5;
    attn_cmd->add_option("--checkpoint", attn_ck, "trained checkpoint")->required();
    attn_cmd->add_option("--image", attn_image, "input image")->required();
    attn_cmd->add_option("--out", attn_out, "overlay output (ppm)")->capture_default_str();
    attn_cmd->add_option("--alpha", attn_alpha, "overlay blend weight")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return 2;
    }

    try {
        if (*synth_cmd) {
            const std::string manifest = synth_dataset(synth_spec, synth_out);
            std::cout << manifest << "\n";
            return 0;
        }

        if (*train_cmd) {
            RunConfig cfg;
            if (!train_config.empty()) cfg = load_config(train_config);
            cfg.train.seed = train_seed;
            if (train_epochs > 0) cfg.train.epochs = train_epochs;
            if (train_batch > 0) cfg.train.batch_size = train_batch;
            if (train_lr > 0.0) cfg.train.lr_init = train_lr;
            cfg.model.validate();
            cfg.train.validate();

            const PromptSet prompts = resolve_prompts(train_prompts);
            const Manifest manifest = load_manifest(train_manifest);
            auto [train_set, heldout] = manifest_samples(manifest);

            Model model(cfg.model, cfg.train.seed, cfg.train.logit_scale_init);
            const auto result = train(model, train_set, heldout, prompts, cfg.train, cfg.augment,
                                      train_log, !train_quiet);
            CheckpointMeta meta{cfg.model, prompts.digest(), cfg.train.seed,
                                static_cast<uint32_t>(cfg.train.epochs)};
            save_checkpoint(model, meta, train_out);
            std::cout << train_out << "\n";
            if (!result.epochs.empty()) {
                const auto& last = result.epochs.back();
                std::cerr << "final loss " << last.mean_loss;
                if (last.heldout_real_rate >= 0) {
                    std::cerr << ", heldout real " << last.heldout_real_rate << "%, fake "
                              << last.heldout_fake_rate << "%";
                }
                std::cerr << "\n";
            }
            return 0;
        }

        if (*eval_cmd) {
            const auto loaded = load_checkpoint(eval_ck);
            const PromptSet prompts = resolve_prompts(eval_prompts);
            const Manifest manifest = load_manifest(eval_manifest);
            const Split split = eval_split == "train" ? Split::Train : Split::Test;
            const EvalReport report = evaluate(manifest, loaded.model, prompts, split, eval_ck);
            std::cout << render_report(report);
            if (!eval_json.empty()) write_json_file(eval_json, report_to_json(report));
            return 0;
        }

        if (*classify_cmd) {
            const auto loaded = load_checkpoint(cls_ck);
            const PromptSet prompts = resolve_prompts(cls_prompts);
            const auto batch = classify_batch(cls_images, loaded.model, prompts);
            for (size_t i = 0; i < cls_images.size(); ++i) {
                if (batch.verdicts[i].has_value()) {
                    std::cout << verdict_json_line(cls_images[i], *batch.verdicts[i]) << "\n";
                }
            }
            for (const auto& f : batch.failures) {
                std::cerr << "error: image " << f.index << " (" << cls_images[f.index]
                          << "): " << f.message << "\n";
            }
            return batch.failures.empty() ? 0 : 1;
        }

        if (*ablate_cmd) {
            const auto loaded = load_checkpoint(abl_ck);
            const PromptSet prompts = resolve_prompts(abl_prompts);
            if (prompts.digest() != loaded.meta.prompt_digest) {
                std::cerr << "warning: prompt set differs from the one the checkpoint was trained "
                             "with\n";
            }
            const Manifest manifest = load_manifest(abl_manifest);
            const auto ab = ablation_numeric_prompts(manifest, loaded.model, prompts, Split::Test, abl_ck);
            std::cout << render_ablation(ab);
            if (!abl_json.empty()) {
                nlohmann::json j;
                j["descriptive"] = report_to_json(ab.descriptive);
                j["numeric"] = report_to_json(ab.numeric);
                j["delta_u"] = ab.delta_u;
                write_json_file(abl_json, j);
            }
            return 0;
        }

        if (*heat_cmd) {
            const auto loaded = load_checkpoint(heat_ck);
            const RgbImage img = load_image(heat_image);
            const auto res = saliency_heatmap(img, heat_text, loaded.model, heat_opts);
            save_ppm(res.overlay, heat_out);
            std::cout << heat_out << "\n";
            return 0;
        }

        if (*attn_cmd) {
            const auto loaded = load_checkpoint(attn_ck);
            const RgbImage img = load_image(attn_image);
            const auto res = attention_map(img, loaded.model, attn_alpha);
            save_ppm(res.overlay, attn_out);
            std::cout << attn_out << "\n";
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
