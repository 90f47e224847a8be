// End-to-end exercise of the command-line surface: subcommands, exit codes,
// and the file formats they produce. Invoked as: test_cli <path-to-pad8>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

int checks = 0;
int failed = 0;

void expect(bool ok, const std::string& what) {
    ++checks;
    if (!ok) {
        ++failed;
        std::cerr << "FAILED: " << what << "\n";
    }
}

struct RunResult {
    int exit_code;
    std::string output;  // stdout + stderr interleaved
};

RunResult run(const std::string& cmd) {
    std::string full = cmd + " 2>&1";
    FILE* pipe = popen(full.c_str(), "r");
    if (!pipe) return {-1, ""};
    std::string out;
    std::array<char, 4096> buf{};
    size_t n = 0;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
    const int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: test_cli <pad8-binary>\n";
        return 1;
    }
    const std::string pad8 = argv[1];
    const std::string work = "cli_work";
    fs::remove_all(work);
    fs::create_directories(work);

    // usage errors exit 2
    expect(run(pad8).exit_code == 2, "bare invocation exits 2");
    expect(run(pad8 + " frobnicate").exit_code == 2, "unknown subcommand exits 2");
    expect(run(pad8 + " eval --no-such-flag").exit_code == 2, "unknown flag exits 2");
    {
        auto help = run(pad8 + " --help");
        expect(help.exit_code == 0, "--help exits 0");
        for (const char* sub : {"synth", "train", "eval", "classify", "ablate", "heatmap", "attention"}) {
            expect(help.output.find(sub) != std::string::npos,
                   std::string("help mentions subcommand ") + sub);
        }
    }

    // synth happy path prints the manifest path
    const std::string data_dir = work + "/data";
    {
        auto r = run(pad8 + " synth --seed 7 --per-class 4 --size 32 --out " + data_dir);
        expect(r.exit_code == 0, "synth exits 0");
        expect(r.output.find("manifest.csv") != std::string::npos, "synth prints the manifest path");
        expect(fs::exists(data_dir + "/manifest.csv"), "manifest file exists");
    }

    // train a miniature model through the CLI
    const std::string cfg = work + "/tiny.cfg";
    {
        std::ofstream out(cfg);
        out << "model.image_size = 32\nmodel.patch_size = 8\nmodel.image_blocks = 1\n"
            << "model.image_heads = 2\nmodel.image_width = 32\nmodel.text_blocks = 1\n"
            << "model.text_heads = 2\nmodel.text_width = 32\nmodel.embed_dim = 16\n";
    }
    const std::string ck = work + "/tiny.c8";
    {
        auto r = run(pad8 + " train --manifest " + data_dir + "/manifest.csv --config " + cfg +
                     " --epochs 2 --batch-size 8 --seed 7 --quiet --out " + ck + " --log " + work +
                     "/log.csv");
        expect(r.exit_code == 0, "train exits 0");
        expect(fs::exists(ck), "checkpoint written");
        std::ifstream log(work + "/log.csv");
        std::string header;
        std::getline(log, header);
        expect(header == "epoch,step,loss,lr,heldout_real_rate,heldout_fake_rate",
               "run log has the documented header");
    }

    // classify prints one json verdict per line
    {
        auto r = run(pad8 + " classify --checkpoint " + ck + " --image " + data_dir +
                     "/class_a/0000.ppm --image " + data_dir + "/class_f/0000.ppm");
        expect(r.exit_code == 0, "classify exits 0");
        int json_lines = 0;
        std::istringstream ss(r.output);
        std::string line;
        while (std::getline(ss, line)) {
            if (line.empty() || line[0] != '{') continue;
            ++json_lines;
            auto j = nlohmann::json::parse(line, nullptr, false);
            expect(!j.is_discarded(), "verdict line parses as json");
            expect(j.contains("path") && j.contains("predicted_class") && j.contains("label") &&
                       j.contains("probabilities") && j.contains("similarities"),
                   "verdict line has all fields");
        }
        expect(json_lines == 2, "one verdict line per image");
    }

    // eval with a missing checkpoint exits 1 naming the path
    {
        auto r = run(pad8 + " eval --checkpoint missing_model.c8 --manifest " + data_dir +
                     "/manifest.csv");
        expect(r.exit_code == 1, "missing checkpoint exits 1");
        expect(r.output.find("missing_model.c8") != std::string::npos, "error names the path");
    }

    // eval happy path writes the json report
    {
        auto r = run(pad8 + " eval --checkpoint " + ck + " --manifest " + data_dir +
                     "/manifest.csv --json " + work + "/report.json");
        expect(r.exit_code == 0, "eval exits 0");
        expect(r.output.find("prompt set: default") != std::string::npos, "report names the prompt set");
        std::ifstream in(work + "/report.json");
        auto j = nlohmann::json::parse(in, nullptr, false);
        expect(!j.is_discarded(), "json report parses");
        expect(j.contains("per_class") && j.contains("real") && j.contains("fake"),
               "json report has class and aggregate rows");
    }

    // ablation runs both prompt sets
    {
        auto r = run(pad8 + " ablate --checkpoint " + ck + " --manifest " + data_dir +
                     "/manifest.csv");
        expect(r.exit_code == 0, "ablate exits 0");
        expect(r.output.find("numeric") != std::string::npos, "ablation mentions the numeric run");
        expect(r.output.find("modal-class fraction") != std::string::npos,
               "ablation reports the collapse statistic");
    }

    // visualization overlays
    {
        auto r = run(pad8 + " heatmap --checkpoint " + ck + " --image " + data_dir +
                     "/class_f/0000.ppm --text \"screen border\" --out " + work +
                     "/heat.ppm --csv " + work + "/sims.csv");
        expect(r.exit_code == 0, "heatmap exits 0");
        expect(fs::exists(work + "/heat.ppm"), "heatmap overlay written");
        expect(fs::exists(work + "/sims.csv"), "similarity csv written");
    }
    {
        auto r = run(pad8 + " attention --checkpoint " + ck + " --image " + data_dir +
                     "/class_f/0000.ppm --out " + work + "/attn.ppm");
        expect(r.exit_code == 0, "attention exits 0");
        expect(fs::exists(work + "/attn.ppm"), "attention overlay written");
    }

    fs::remove_all(work);
    std::cout << (checks - failed) << "/" << checks << " cli checks passed\n";
    return failed == 0 ? 0 : 1;
}
