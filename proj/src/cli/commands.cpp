#include "gridvqa/cli.hpp"

#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gridvqa/errors.hpp"
#include "gridvqa/image.hpp"
#include "gridvqa/log.hpp"
#include "gridvqa/metrics.hpp"
#include "gridvqa/run_config.hpp"
#include "gridvqa/synth.hpp"
#include "gridvqa/trainer.hpp"

namespace gridvqa::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Missing input file: reported with exit code 2.
class PathError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string config;
    std::uint64_t seed = 0;
    std::size_t grid = 0;
    std::string stack;
    double anls_threshold = 0.0;
    std::string ensemble_preds;
    double ensemble_tau = 0.37;
    bool quiet = false;
    std::string dataset, embeddings, features, checkpoint, out;

    // train
    std::size_t epochs = 0, batch_size = 0;
    double lr = 0.0;
    // eval / predict / viz
    std::string predictions, report, output, question_id, image;
    std::vector<std::size_t> scales;
    bool ascii = false, no_outline = false;
    // synth
    std::size_t count = 200;

    std::map<std::string, const CLI::Option*> given;
    bool has(const std::string& name) const {
        auto it = given.find(name);
        return it != given.end() && it->second->count() > 0;
    }
};

void require_file(const fs::path& p, const char* what) {
    if (p.empty()) throw PathError(std::string("no ") + what + " path given");
    if (!fs::exists(p)) throw PathError(std::string(what) + " not found: " + p.string());
}

RunConfig resolve_config(const Options& o) {
    RunConfig c;
    if (!o.config.empty()) {
        require_file(o.config, "config");
        c = load_run_config(o.config);
    }
    if (o.has("--seed")) c.seed = o.seed;
    if (o.has("--grid-size")) c.grid = o.grid;
    if (o.has("--stack")) c.model.stack = parse_stack_mode(o.stack);
    if (o.has("--anls-threshold")) c.anls_threshold = o.anls_threshold;
    if (o.has("--ensemble-tau")) c.ensemble_tau = o.ensemble_tau;
    if (o.has("--dataset")) c.dataset = o.dataset;
    if (o.has("--embeddings")) c.embeddings = o.embeddings;
    if (o.has("--features")) c.features = o.features;
    if (o.has("--checkpoint")) c.checkpoint = o.checkpoint;
    if (o.has("--out")) c.output_dir = o.out;
    if (o.has("--epochs")) c.epochs = o.epochs;
    if (o.has("--batch-size")) c.batch_size = o.batch_size;
    if (o.has("--lr")) c.learning_rate = o.lr;
    if (c.grid == 0) throw ConfigError("grid size must be positive");
    if (!(c.ensemble_tau >= 0.0 && c.ensemble_tau <= 1.0)) throw ConfigError("ensemble tau must lie in [0, 1]");
    return c;
}

struct Resources {
    EmbeddingTable embeddings;
    FeatureProvider features;
};

Resources load_resources(RunConfig& c) {
    require_file(c.embeddings, "embeddings");
    if (!c.features.empty()) require_file(c.features, "features");
    Resources r{EmbeddingTable::load(c.embeddings),
                c.features.empty() ? FeatureProvider::synthetic(c.grid, c.model.visual_channels, c.feature_seed)
                                   : FeatureProvider::from_file(c.features)};
    r.features.set_grid(c.grid);
    // Input widths follow the data.
    c.model.visual_channels = r.features.channels();
    c.model.embedding_dim = r.embeddings.dimension();
    return r;
}

PointerModel<float> load_model(const RunConfig& c) {
    require_file(c.checkpoint, "checkpoint");
    PointerModel<float> model(c.model, c.seed);
    model.load(c.checkpoint);
    return model;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << text << '\n';
}

const QaExample& find_example(const std::vector<QaExample>& examples, const std::string& qid) {
    if (examples.empty()) throw LookupError("dataset has no examples");
    if (qid.empty()) return examples.front();
    for (const auto& ex : examples)
        if (ex.question_id == qid) return ex;
    throw LookupError("no example with question_id \"" + qid + "\"");
}

// ---------------------------------------------------------------------------

int cmd_train(const Options& o, std::ostream& out) {
    RunConfig c = resolve_config(o);
    require_file(c.dataset, "dataset");
    auto res = load_resources(c);
    const auto all = load_dataset(c.dataset);
    auto filtered = filter_trainable(all);
    for (const auto& why : filtered.reasons) log::debug("discarded " + why);
    if (!o.quiet) {
        out << "kept " << filtered.kept.size() << " of " << all.size() << " examples, discarded "
            << filtered.discarded.size() << " without an answer among OCR tokens\n";
    }
    if (filtered.kept.empty()) throw ContractError("no trainable examples after filtering");

    PointerModel<float> model(c.model, c.seed);
    TrainConfig tc;
    tc.epochs = c.epochs;
    tc.batch_size = c.batch_size;
    tc.learning_rate = c.learning_rate;
    tc.seed = c.seed;
    tc.patience = c.patience;
    tc.output_dir = c.output_dir;
    Providers providers{res.embeddings, res.features};
    auto result = train(model, filtered.kept, providers, tc, [&](const EpochLog& e) {
        if (!o.quiet) {
            out << "epoch " << e.epoch << "  loss " << std::fixed << std::setprecision(4) << e.mean_loss
                << "  train ANLS " << e.train_anls << '\n'
                << std::defaultfloat;
        }
    });

    RunConfig resolved = c;
    resolved.checkpoint = c.output_dir / "model.ckpt";
    save_run_config(c.output_dir / "config.json", resolved);
    json summary{{"examples", all.size()},
                 {"kept", filtered.kept.size()},
                 {"discarded", filtered.discarded.size()},
                 {"epochs_run", result.log.size()},
                 {"best_epoch", result.best_epoch},
                 {"best_train_anls", result.best_anls},
                 {"final_train_anls", result.log.empty() ? 0.0 : result.log.back().train_anls},
                 {"final_mean_loss", result.log.empty() ? 0.0 : result.log.back().mean_loss}};
    write_text(c.output_dir / "summary.json", summary.dump(2));
    if (!o.quiet) out << "checkpoint written to " << (c.output_dir / "model.ckpt").string() << '\n';
    return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
    RunConfig c = resolve_config(o);
    require_file(c.dataset, "dataset");
    const auto examples = load_dataset(c.dataset);

    std::map<std::string, std::string> pointer_answers;
    std::map<std::string, double> pointer_conf;
    if (!o.predictions.empty()) {
        require_file(o.predictions, "predictions");
        for (const auto& r : read_predictions(o.predictions)) {
            pointer_answers[r.question_id] = r.answer;
            pointer_conf[r.question_id] = r.confidence;
        }
    } else {
        auto res = load_resources(c);
        auto model = load_model(c);
        Providers providers{res.embeddings, res.features};
        for (const auto& ex : examples) {
            auto pred = predict(model, ex, providers);
            pointer_answers[ex.question_id] = pred.answer_text.value_or("");
            pointer_conf[ex.question_id] = pred.confidence;
        }
    }

    std::map<std::string, std::string> final_answers = pointer_answers;
    json ensemble_info = nullptr;
    if (!o.ensemble_preds.empty()) {
        require_file(o.ensemble_preds, "ensemble predictions");
        std::map<std::string, PredictionRecord> classifier;
        for (auto& r : read_predictions(o.ensemble_preds)) classifier[r.question_id] = r;
        std::vector<EnsembleInput> inputs;
        for (const auto& ex : examples) {
            EnsembleInput in;
            in.question_id = ex.question_id;
            in.pointer_answer = pointer_answers[ex.question_id];
            in.pointer_confidence = pointer_conf[ex.question_id];
            if (auto it = classifier.find(ex.question_id); it != classifier.end()) {
                in.classifier_answer = it->second.answer;
                in.classifier_confidence = it->second.confidence;
            }
            inputs.push_back(std::move(in));
        }
        json switched = json::array();
        for (const auto& choice : ensemble_select(inputs, c.ensemble_tau)) {
            final_answers[choice.question_id] = choice.answer;
            if (choice.from_classifier) switched.push_back(choice.question_id);
        }
        ensemble_info = {{"tau", c.ensemble_tau}, {"from_classifier", std::move(switched)}};
    }

    ScoreOptions so;
    so.anls_threshold = c.anls_threshold;
    const auto report = score_anls(final_answers, examples, so);
    json doc = json::parse(report_to_json(report));
    if (!ensemble_info.is_null()) doc["ensemble"] = ensemble_info;
    doc["anls_threshold"] = c.anls_threshold ? json(*c.anls_threshold) : json(nullptr);
    const fs::path report_path = o.report.empty() ? c.output_dir / "report.json" : fs::path(o.report);
    write_text(report_path, doc.dump(1));
    if (!o.quiet) {
        out << std::fixed << std::setprecision(4) << "ANLS " << report.anls << "  Acc " << std::setprecision(2)
            << report.accuracy << "  (" << report.examples.size() << " questions; answer-in-OCR subset "
            << report.answer_in_ocr.count << ": ANLS " << std::setprecision(4) << report.answer_in_ocr.anls
            << "  Acc " << std::setprecision(2) << report.answer_in_ocr.accuracy << ")\n"
            << std::defaultfloat << "report written to " << report_path.string() << '\n';
    }
    return kExitOk;
}

int cmd_predict(const Options& o, std::ostream& out) {
    RunConfig c = resolve_config(o);
    require_file(c.dataset, "dataset");
    const auto examples = load_dataset(c.dataset);
    auto res = load_resources(c);
    auto model = load_model(c);
    Providers providers{res.embeddings, res.features};
    const std::vector<std::size_t> scales = o.scales.empty() ? std::vector<std::size_t>{c.grid} : o.scales;

    std::vector<std::vector<PredictionRecord>> per_scale(scales.size());
    for (const auto& ex : examples) {
        auto preds = predict_multiscale(model, ex, providers, scales);
        for (std::size_t s = 0; s < scales.size(); ++s) {
            per_scale[s].push_back({ex.question_id, preds[s].answer_text.value_or(""), preds[s].confidence});
        }
    }
    for (std::size_t s = 0; s < scales.size(); ++s) {
        fs::path path;
        if (scales.size() == 1) {
            path = o.output.empty() ? c.output_dir / "predictions.jsonl" : fs::path(o.output);
        } else {
            path = c.output_dir / ("predictions_g" + std::to_string(scales[s]) + ".jsonl");
        }
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        write_predictions(path, per_scale[s]);
        if (!o.quiet) out << "grid " << scales[s] << ": predictions written to " << path.string() << '\n';
    }
    return kExitOk;
}

int cmd_viz(const Options& o, std::ostream& out) {
    RunConfig c = resolve_config(o);
    require_file(c.dataset, "dataset");
    const auto examples = load_dataset(c.dataset);
    auto res = load_resources(c);
    auto model = load_model(c);
    Providers providers{res.embeddings, res.features};
    const QaExample& ex = find_example(examples, o.question_id);
    auto pred = predict(model, ex, providers);
    auto img = render_attention(pred.p_att, kVizScale,
                                o.no_outline ? std::nullopt : std::optional<GridCell>(pred.argmax_cell));
    const fs::path path = o.image.empty() ? c.output_dir / ("attention_" + ex.question_id + ".pgm") : fs::path(o.image);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_pgm(path, img, o.ascii);
    if (!o.quiet) {
        out << "question " << ex.question_id << ": argmax cell (" << pred.argmax_cell.row << ", "
            << pred.argmax_cell.col << "), p = " << pred.confidence << ", answer \""
            << pred.answer_text.value_or("") << "\"\nimage written to " << path.string() << '\n';
    }
    return kExitOk;
}

int cmd_synth(const Options& o, std::ostream& out) {
    SynthConfig sc;
    sc.seed = o.has("--seed") ? o.seed : 42;
    sc.count = o.count;
    if (o.has("--grid-size")) sc.grid = o.grid;
    const fs::path dir = o.out.empty() ? fs::path("synth") : fs::path(o.out);
    auto data = generate_synthetic(sc);
    auto paths = write_synthetic(data, sc, dir);
    if (!o.quiet) {
        out << "wrote " << data.examples.size() << " examples to " << paths.dataset.string() << ", features to "
            << paths.features.string() << ", embeddings to " << paths.embeddings.string() << ", config to "
            << paths.config.string() << '\n';
    }
    return kExitOk;
}

int cmd_analyze(const Options& o, std::ostream& out) {
    RunConfig c = resolve_config(o);
    require_file(c.dataset, "dataset");
    const auto examples = load_dataset(c.dataset);
    const auto r = answer_recall(examples);
    json doc{{"examples", examples.size()}, {"answer_recall", r.recall}, {"anls_upper_bound", r.upper_bound}};
    if (!o.report.empty()) write_text(o.report, doc.dump(2));
    if (!o.quiet) {
        out << std::fixed << std::setprecision(2) << "answer recall " << r.recall << "%  ANLS upper bound "
            << std::setprecision(4) << r.upper_bound << "  (" << examples.size() << " examples)\n"
            << std::defaultfloat;
    }
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Grid-attention pointer model for scene-text visual question answering"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;

    auto add = [&](CLI::App* target, const std::string& name, auto& var, const std::string& help) {
        o.given[name] = target->add_option(name, var, help);
    };
    add(&app, "--config", o.config, "run configuration file (JSON)");
    add(&app, "--seed", o.seed, "random seed");
    add(&app, "--grid-size", o.grid, "grid size G");
    o.given["--stack"] = app.add_option("--stack", o.stack, "answer head")->check(CLI::IsMember({"single", "stacked", "fcn"}));
    o.given["--anls-threshold"] = app.add_option("--anls-threshold", o.anls_threshold, "zero similarities below this value")
                                      ->check(CLI::Range(0.0, 1.0));
    add(&app, "--ensemble-preds", o.ensemble_preds, "classifier predictions (JSONL) for ensemble mode");
    o.given["--ensemble-tau"] = app.add_option("--ensemble-tau", o.ensemble_tau, "classifier confidence threshold")
                                    ->check(CLI::Range(0.0, 1.0));
    app.add_flag("--quiet,-q", o.quiet, "suppress progress output");
    add(&app, "--dataset", o.dataset, "annotation file");
    add(&app, "--embeddings", o.embeddings, "word embedding file");
    add(&app, "--features", o.features, "visual feature file");
    add(&app, "--checkpoint", o.checkpoint, "model checkpoint");
    add(&app, "--out", o.out, "output directory");

    auto* train_cmd = app.add_subcommand("train", "train a model");
    add(train_cmd, "--epochs", o.epochs, "epoch cap");
    add(train_cmd, "--batch-size", o.batch_size, "mini-batch size");
    add(train_cmd, "--lr", o.lr, "learning rate");

    auto* eval_cmd = app.add_subcommand("eval", "score predictions (ANLS, accuracy)");
    add(eval_cmd, "--predictions", o.predictions, "score this predictions file instead of running the model");
    add(eval_cmd, "--report", o.report, "report path (default <out>/report.json)");

    auto* predict_cmd = app.add_subcommand("predict", "write model predictions");
    add(predict_cmd, "--output", o.output, "predictions path (default <out>/predictions.jsonl)");
    o.given["--scales"] = predict_cmd->add_option("--scales", o.scales, "grid sizes for multi-scale inference")
                              ->delimiter(',');

    auto* viz_cmd = app.add_subcommand("viz", "export an attention map as a PGM image");
    add(viz_cmd, "--question-id", o.question_id, "example to render (default: first)");
    add(viz_cmd, "--image", o.image, "image path");
    viz_cmd->add_flag("--ascii", o.ascii, "write plain (P2) PGM");
    viz_cmd->add_flag("--no-outline", o.no_outline, "do not outline the argmax cell");

    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
    o.given["--count"] = synth_cmd->add_option("--count", o.count, "number of examples")->check(CLI::PositiveNumber);

    auto* analyze_cmd = app.add_subcommand("analyze", "answer recall and ANLS upper bound");
    add(analyze_cmd, "--report", o.report, "write the result as JSON");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    const auto previous_level = log::threshold().load();
    if (o.quiet) log::set_level(log::Level::Warn);
    int rc = kExitFailure;
    try {
        if (*train_cmd) rc = cmd_train(o, out);
        else if (*eval_cmd) rc = cmd_eval(o, out);
        else if (*predict_cmd) rc = cmd_predict(o, out);
        else if (*viz_cmd) rc = cmd_viz(o, out);
        else if (*synth_cmd) rc = cmd_synth(o, out);
        else if (*analyze_cmd) rc = cmd_analyze(o, out);
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << '\n';
        rc = kExitNumeric;
    } catch (const PathError& e) {
        err << "error: " << e.what() << '\n';
        rc = kExitUsage;
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << '\n';
        rc = kExitUsage;
    } catch (const ParseError& e) {
        err << "input error: " << e.what() << '\n';
        rc = kExitUsage;
    } catch (const LookupError& e) {
        err << "lookup error: " << e.what() << '\n';
        rc = kExitUsage;
    } catch (const DimensionError& e) {
        err << "dimension error: " << e.what() << '\n';
        rc = kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        rc = kExitFailure;
    }
    log::set_level(previous_level);
    return rc;
}

}  // namespace gridvqa::cli
