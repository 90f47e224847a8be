#include "pad8/config.hpp"

#include <fstream>

namespace pad8 {

namespace {

int parse_int(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        const int v = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer for " + key + ": `" + value + "`");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for " + key + ": `" + value + "`");
    }
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        const unsigned long long v = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: bad unsigned integer for " + key + ": `" + value + "`");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config: bad boolean for " + key + ": `" + value + "`");
}

std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r");
    const size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

}  // namespace

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "model.image_size") cfg.model.image_size = parse_int(key, value);
    else if (key == "model.patch_size") cfg.model.patch_size = parse_int(key, value);
    else if (key == "model.image_blocks") cfg.model.image_blocks = parse_int(key, value);
    else if (key == "model.image_heads") cfg.model.image_heads = parse_int(key, value);
    else if (key == "model.image_width") cfg.model.image_width = parse_int(key, value);
    else if (key == "model.text_blocks") cfg.model.text_blocks = parse_int(key, value);
    else if (key == "model.text_heads") cfg.model.text_heads = parse_int(key, value);
    else if (key == "model.text_width") cfg.model.text_width = parse_int(key, value);
    else if (key == "model.embed_dim") cfg.model.embed_dim = parse_int(key, value);
    else if (key == "model.context_length") cfg.model.context_length = parse_int(key, value);
    else if (key == "train.epochs") cfg.train.epochs = parse_int(key, value);
    else if (key == "train.batch_size") cfg.train.batch_size = parse_int(key, value);
    else if (key == "train.lr_init") cfg.train.lr_init = parse_double(key, value);
    else if (key == "train.weight_decay") cfg.train.weight_decay = parse_double(key, value);
    else if (key == "train.cycle_epochs") cfg.train.cycle_epochs = parse_int(key, value);
    else if (key == "train.lr_min_fraction") cfg.train.lr_min_fraction = parse_double(key, value);
    else if (key == "train.seed") cfg.train.seed = parse_u64(key, value);
    else if (key == "train.logit_scale_init") cfg.train.logit_scale_init = parse_double(key, value);
    else if (key == "train.skip_bad_images") cfg.train.skip_bad_images = parse_bool(key, value);
    else if (key == "augment.flip_prob") cfg.augment.horizontal_flip_prob = parse_double(key, value);
    else if (key == "augment.erase_prob") cfg.augment.random_erase.prob = parse_double(key, value);
    else if (key == "augment.erase_area_lo") cfg.augment.random_erase.area_lo = parse_double(key, value);
    else if (key == "augment.erase_area_hi") cfg.augment.random_erase.area_hi = parse_double(key, value);
    else if (key == "augment.erase_aspect_lo") cfg.augment.random_erase.aspect_lo = parse_double(key, value);
    else if (key == "augment.erase_aspect_hi") cfg.augment.random_erase.aspect_hi = parse_double(key, value);
    else throw ConfigError("config: unknown key `" + key + "`");
}

RunConfig load_config(const std::string& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string row = trim(line);
        if (row.empty() || row[0] == '#') continue;
        const size_t eq = row.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config " + path + " line " + std::to_string(line_no) +
                              ": expected key=value");
        }
        apply_config_entry(base, trim(row.substr(0, eq)), trim(row.substr(eq + 1)));
    }
    base.model.validate();
    base.train.validate();
    base.augment.validate();
    return base;
}

}  // namespace pad8
