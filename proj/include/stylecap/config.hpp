#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace stylecap {

enum class UnpairedMode { contrastive, language_model };

// All run hyperparameters, serialized as flat `key = value` text. Every field
// has a default; config files and CLI overrides replace individual keys.
struct RunConfig {
    // model dimensions
    int image_feature_dim = 2048;
    int multimodal_dim = 1024;   // shared image/object embedding space
    int hidden_dim = 1024;       // caption encoder/decoder LSTM hidden size
    int latent_dim = 100;
    int classifier_hidden_dim = 512;  // attention style classifier
    int classifier_embed_dim = 512;

    // objective
    double tau = 0.1;
    double lambda_cont = 0.1;
    double lambda_ce = 1.0;
    double lambda_kl = 0.02;
    double lambda_style = 2.0;

    // optimization
    double lr = 5e-5;
    double classifier_lr = 1e-3;
    int batch_size = 16;
    int epochs = 30;
    int classifier_epochs = 20;
    std::uint64_t seed = 1;
    double val_fraction = 0.1;
    int min_count = 1;

    // generation
    int max_len = 20;
    double phrase_ratio = 0.3;
    double recheck_threshold = 0.9;
    int n_candidates = 10;
    int max_reject_attempts = 100;

    // ablation switches
    bool disable_recheck = false;
    UnpairedMode unpaired_mode = UnpairedMode::contrastive;
    bool share_object_embedding = true;

    void set(const std::string& key, const std::string& value);
    std::string to_string() const;

    static RunConfig from_file(const std::string& path);
    static RunConfig from_string(const std::string& text);
};

namespace detail {

inline int parse_int(const std::string& v) {
    std::size_t pos = 0;
    int r = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("bad integer: " + v);
    return r;
}

inline double parse_double(const std::string& v) {
    std::size_t pos = 0;
    double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("bad number: " + v);
    return r;
}

inline bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("bad bool: " + v);
}

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace detail

inline void RunConfig::set(const std::string& key, const std::string& value) {
    using namespace detail;
    if (key == "image_feature_dim") image_feature_dim = parse_int(value);
    else if (key == "multimodal_dim") multimodal_dim = parse_int(value);
    else if (key == "hidden_dim") hidden_dim = parse_int(value);
    else if (key == "latent_dim") latent_dim = parse_int(value);
    else if (key == "classifier_hidden_dim") classifier_hidden_dim = parse_int(value);
    else if (key == "classifier_embed_dim") classifier_embed_dim = parse_int(value);
    else if (key == "tau") tau = parse_double(value);
    else if (key == "lambda_cont") lambda_cont = parse_double(value);
    else if (key == "lambda_ce") lambda_ce = parse_double(value);
    else if (key == "lambda_kl") lambda_kl = parse_double(value);
    else if (key == "lambda_style") lambda_style = parse_double(value);
    else if (key == "lr") lr = parse_double(value);
    else if (key == "classifier_lr") classifier_lr = parse_double(value);
    else if (key == "batch_size") batch_size = parse_int(value);
    else if (key == "epochs") epochs = parse_int(value);
    else if (key == "classifier_epochs") classifier_epochs = parse_int(value);
    else if (key == "seed") seed = std::stoull(value);
    else if (key == "val_fraction") val_fraction = parse_double(value);
    else if (key == "min_count") min_count = parse_int(value);
    else if (key == "max_len") max_len = parse_int(value);
    else if (key == "phrase_ratio") phrase_ratio = parse_double(value);
    else if (key == "recheck_threshold") recheck_threshold = parse_double(value);
    else if (key == "n_candidates") n_candidates = parse_int(value);
    else if (key == "max_reject_attempts") max_reject_attempts = parse_int(value);
    else if (key == "disable_recheck") disable_recheck = parse_bool(value);
    else if (key == "share_object_embedding") share_object_embedding = parse_bool(value);
    else if (key == "unpaired_mode") {
        if (value == "contrastive") unpaired_mode = UnpairedMode::contrastive;
        else if (value == "language_model") unpaired_mode = UnpairedMode::language_model;
        else throw std::invalid_argument("unpaired_mode must be contrastive or language_model");
    } else {
        throw std::invalid_argument("unknown config key: " + key);
    }
}

inline std::string RunConfig::to_string() const {
    std::ostringstream os;
    os.precision(17);
    os << "image_feature_dim = " << image_feature_dim << "\n"
       << "multimodal_dim = " << multimodal_dim << "\n"
       << "hidden_dim = " << hidden_dim << "\n"
       << "latent_dim = " << latent_dim << "\n"
       << "classifier_hidden_dim = " << classifier_hidden_dim << "\n"
       << "classifier_embed_dim = " << classifier_embed_dim << "\n"
       << "tau = " << tau << "\n"
       << "lambda_cont = " << lambda_cont << "\n"
       << "lambda_ce = " << lambda_ce << "\n"
       << "lambda_kl = " << lambda_kl << "\n"
       << "lambda_style = " << lambda_style << "\n"
       << "lr = " << lr << "\n"
       << "classifier_lr = " << classifier_lr << "\n"
       << "batch_size = " << batch_size << "\n"
       << "epochs = " << epochs << "\n"
       << "classifier_epochs = " << classifier_epochs << "\n"
       << "seed = " << seed << "\n"
       << "val_fraction = " << val_fraction << "\n"
       << "min_count = " << min_count << "\n"
       << "max_len = " << max_len << "\n"
       << "phrase_ratio = " << phrase_ratio << "\n"
       << "recheck_threshold = " << recheck_threshold << "\n"
       << "n_candidates = " << n_candidates << "\n"
       << "max_reject_attempts = " << max_reject_attempts << "\n"
       << "disable_recheck = " << (disable_recheck ? "true" : "false") << "\n"
       << "share_object_embedding = " << (share_object_embedding ? "true" : "false") << "\n"
       << "unpaired_mode = "
       << (unpaired_mode == UnpairedMode::contrastive ? "contrastive" : "language_model") << "\n";
    return os.str();
}

inline RunConfig RunConfig::from_string(const std::string& text) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        cfg.set(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    return cfg;
}

inline RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str());
}

}  // namespace stylecap
