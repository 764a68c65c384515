#include "gridvqa/run_config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gridvqa/errors.hpp"

namespace gridvqa {

using nlohmann::json;

namespace {

template <typename V>
void read_field(const json& obj, const char* key, V& out) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return;
    try {
        out = it->get<V>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config field \"") + key + "\" has the wrong type");
    }
}

void read_path(const json& obj, const char* key, std::filesystem::path& out, const std::filesystem::path& base) {
    std::string s;
    read_field(obj, key, s);
    if (s.empty()) return;
    std::filesystem::path p(s);
    out = (p.is_relative() && !base.empty()) ? base / p : p;
}

}  // namespace

std::string run_config_to_json(const RunConfig& c) {
    const ModelConfig& m = c.model;
    json doc{
        {"dataset", c.dataset.string()},
        {"embeddings", c.embeddings.string()},
        {"features", c.features.string()},
        {"checkpoint", c.checkpoint.string()},
        {"output_dir", c.output_dir.string()},
        {"grid", c.grid},
        {"feature_seed", c.feature_seed},
        {"model",
         {{"visual_channels", m.visual_channels},
          {"embedding_dim", m.embedding_dim},
          {"lstm_hidden", m.lstm_hidden},
          {"question_dim", m.question_dim},
          {"attention_hidden", m.attention_hidden},
          {"attention_dim", m.attention_dim},
          {"fcn_channels1", m.fcn_channels1},
          {"fcn_channels2", m.fcn_channels2},
          {"dropout", m.dropout},
          {"max_question_length", m.max_question_length},
          {"stack", to_string(m.stack)}}},
        {"train",
         {{"seed", c.seed},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"patience", c.patience}}},
        {"metrics",
         {{"anls_threshold", c.anls_threshold ? json(*c.anls_threshold) : json(nullptr)},
          {"ensemble_tau", c.ensemble_tau}}},
    };
    return doc.dump(2);
}

RunConfig run_config_from_json(const std::string& text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig c;
    read_path(doc, "dataset", c.dataset, base_dir);
    read_path(doc, "embeddings", c.embeddings, base_dir);
    read_path(doc, "features", c.features, base_dir);
    read_path(doc, "checkpoint", c.checkpoint, base_dir);
    read_path(doc, "output_dir", c.output_dir, base_dir);
    read_field(doc, "grid", c.grid);
    read_field(doc, "feature_seed", c.feature_seed);
    if (auto it = doc.find("model"); it != doc.end() && it->is_object()) {
        ModelConfig& m = c.model;
        read_field(*it, "visual_channels", m.visual_channels);
        read_field(*it, "embedding_dim", m.embedding_dim);
        read_field(*it, "lstm_hidden", m.lstm_hidden);
        read_field(*it, "question_dim", m.question_dim);
        read_field(*it, "attention_hidden", m.attention_hidden);
        read_field(*it, "attention_dim", m.attention_dim);
        read_field(*it, "fcn_channels1", m.fcn_channels1);
        read_field(*it, "fcn_channels2", m.fcn_channels2);
        read_field(*it, "dropout", m.dropout);
        read_field(*it, "max_question_length", m.max_question_length);
        std::string stack;
        read_field(*it, "stack", stack);
        if (!stack.empty()) m.stack = parse_stack_mode(stack);
    }
    if (auto it = doc.find("train"); it != doc.end() && it->is_object()) {
        read_field(*it, "seed", c.seed);
        read_field(*it, "learning_rate", c.learning_rate);
        read_field(*it, "batch_size", c.batch_size);
        read_field(*it, "epochs", c.epochs);
        read_field(*it, "patience", c.patience);
    }
    if (auto it = doc.find("metrics"); it != doc.end() && it->is_object()) {
        if (auto t = it->find("anls_threshold"); t != it->end() && !t->is_null()) {
            if (!t->is_number()) throw ConfigError("config field \"anls_threshold\" has the wrong type");
            c.anls_threshold = t->get<double>();
        }
        read_field(*it, "ensemble_tau", c.ensemble_tau);
    }
    c.model.validate();
    if (c.grid == 0) throw ConfigError("grid must be positive");
    if (c.batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(c.ensemble_tau >= 0.0 && c.ensemble_tau <= 1.0)) throw ConfigError("ensemble_tau must lie in [0, 1]");
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw LookupError("cannot open config: " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return run_config_from_json(ss.str(), path.parent_path());
}

void save_run_config(const std::filesystem::path& path, const RunConfig& cfg) {
    // Relative paths in the file mean "next to the file", so pin ours down first.
    RunConfig pinned = cfg;
    for (auto* p : {&pinned.dataset, &pinned.embeddings, &pinned.features, &pinned.checkpoint, &pinned.output_dir}) {
        if (!p->empty()) *p = std::filesystem::absolute(*p).lexically_normal();
    }
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open config for writing: " + path.string());
    os << run_config_to_json(pinned) << '\n';
}

}  // namespace gridvqa
