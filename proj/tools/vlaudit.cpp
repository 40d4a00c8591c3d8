// vlaudit: batch membership-inference auditing and fixture generation.
//
// Every subcommand writes fixed-name outputs plus manifest.json under
// --out-dir. Failures print one JSON line on stderr and exit nonzero.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "CLI11.hpp"
#include "cli_support.hpp"
#include "vlaudit/ber.hpp"
#include "vlaudit/evaluation.hpp"
#include "vlaudit/io.hpp"
#include "vlaudit/parallel.hpp"
#include "vlaudit/probes.hpp"
#include "vlaudit/report_json.hpp"
#include "vlaudit/scores.hpp"
#include "vlaudit/shift.hpp"
#include "vlaudit/synth.hpp"

namespace fs = std::filesystem;
using namespace vlaudit;
using nlohmann::json;

namespace {

struct Globals {
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    int threads = 0;
};

template <class F>
std::string to_text(F&& write) {
    std::ostringstream os;
    write(os);
    return os.str();
}

// score ----------------------------------------------------------------------

struct ScoreOptions {
    std::string traces;
    std::string method;
    double k = 20.0;
    double alpha = 2.0;
    std::string segment = "both";
    bool shannon = false;
    std::string sweep;
};

void run_score(const Globals& g, const ScoreOptions& o) {
    cli::RunOutputs out(g.out_dir, "score");
    const auto traces = io::read_traces(o.traces);
    out.add_input(o.traces);

    mi::MethodSpec spec;
    spec.kind = mi::method_from_string(o.method);
    spec.k_percent = o.k;
    spec.alpha = o.alpha;
    spec.filter = segment_filter_from_string(o.segment);
    spec.shannon = o.shannon;
    out.add_parameter("method", mi::method_name(spec.kind));
    out.add_parameter("segment", to_string(spec.filter));
    if (mi::uses_alpha(spec.kind)) out.add_parameter("alpha", spec.alpha);
    if (mi::uses_alpha(spec.kind)) out.add_parameter("shannon", spec.shannon);

    auto emit = [&](const std::string& stem, const mi::MethodSpec& s) {
        const auto table = mi::score_dataset(traces, s);
        std::ostringstream csv, meta;
        io::write_scores(csv, meta, table);
        out.add_file(stem + ".csv", csv.str());
        out.add_file(stem + ".meta.json", meta.str());
    };

    if (!o.sweep.empty()) {
        if (!mi::uses_k(spec.kind)) throw ParameterError("--sweep-k needs a K-based method");
        json ks = json::array();
        for (double k : cli::parse_range(o.sweep)) {
            mi::MethodSpec s = spec;
            s.k_percent = k == 0.0 ? mi::kSweepZeroLimit : k;
            emit("scores_k" + io::format_double(k), s);
            ks.push_back(k);
        }
        out.add_parameter("sweep_k", ks);
    } else {
        if (mi::uses_k(spec.kind)) out.add_parameter("k", spec.k_percent);
        emit("scores", spec);
    }

    const auto labels = mi::labels_for(traces, spec);
    if (!labels.ids.empty()) out.add_file("labels.csv", to_text([&](std::ostream& os) { io::write_labels(os, labels); }));
    out.commit(g.seed);
}

// eval -----------------------------------------------------------------------

struct EvalOptions {
    std::string scores;
    std::string labels;
    std::vector<double> fpr{0.05};
};

void run_eval(const Globals& g, const EvalOptions& o) {
    cli::RunOutputs out(g.out_dir, "eval");
    const auto table = io::read_scores(o.scores);
    const auto labels = io::read_labels(o.labels);
    out.add_input(o.scores);
    out.add_input(fs::path(o.scores).replace_extension(".meta.json"));
    out.add_input(o.labels);
    for (double t : o.fpr)
        if (!(t >= 0.0 && t <= 1.0)) throw ParameterError("FPR targets must be in [0, 1]");
    out.add_parameter("fpr_targets", o.fpr);

    auto roc = report::to_json(eval::evaluate(table, labels, o.fpr));
    roc["method"] = table.method;
    roc["orientation"] = to_string(table.orientation);
    out.add_file("roc.json", report::dump(roc));
    out.commit(g.seed);
}

// wired ----------------------------------------------------------------------

struct WiredOptions {
    std::vector<std::string> spaces;
    std::string labels;
    std::size_t n_proj = 128;
    double q = 2.0;
    std::size_t repeats = 10;
};

std::pair<shift::Rows, shift::Rows> split_space(const EmbeddingSpace& space, const LabeledDataset& labels) {
    shift::Rows s1, s2;
    for (std::size_t i = 0; i < space.size(); ++i) {
        const auto& id = space.ids()[i];
        if (!labels.contains(id)) throw DataError("space " + space.name() + ": unlabeled id " + id);
        (labels.at(id) == 1 ? s1 : s2).push_back(space.row(i));
    }
    return {std::move(s1), std::move(s2)};
}

void run_wired(const Globals& g, const WiredOptions& o) {
    cli::RunOutputs out(g.out_dir, "wired");
    std::optional<LabeledDataset> labels;
    if (!o.labels.empty()) {
        labels = io::read_labels(o.labels);
        out.add_input(o.labels);
    }
    std::vector<shift::SpacePair> pairs;
    json specs = json::array();
    for (const auto& spec : o.spaces) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0) throw ParameterError("--space expects name=path[,path]: " + spec);
        shift::SpacePair pair;
        pair.name = spec.substr(0, eq);
        const std::string paths = spec.substr(eq + 1);
        const auto comma = paths.find(',');
        if (comma == std::string::npos) {
            if (!labels) throw ParameterError("space " + pair.name + " has one file; --labels is required");
            const auto space = io::read_embeddings(paths, pair.name);
            out.add_input(paths);
            std::tie(pair.s1, pair.s2) = split_space(space, *labels);
        } else {
            const std::string p1 = paths.substr(0, comma), p2 = paths.substr(comma + 1);
            const auto a = io::read_embeddings(p1, pair.name), b = io::read_embeddings(p2, pair.name);
            if (a.dim() != b.dim()) throw DataError("space " + pair.name + ": S1 and S2 differ in dimension");
            out.add_input(p1);
            out.add_input(p2);
            pair.s1 = a.rows();
            pair.s2 = b.rows();
        }
        specs.push_back(spec);
        pairs.push_back(std::move(pair));
    }
    shift::WiredParams params{o.n_proj, o.q, o.repeats, g.seed};
    out.add_parameter("spaces", specs);
    out.add_parameter("n_proj", o.n_proj);
    out.add_parameter("q", o.q);
    out.add_parameter("repeats", o.repeats);
    out.add_file("wired.json", report::dump(report::to_json(shift::wired(pairs, params))));
    out.commit(g.seed);
}

// freq -----------------------------------------------------------------------

struct FreqOptions {
    std::string images;
    std::size_t bands = 10;
    std::string out = "freq.csv";
};

void run_freq(const Globals& g, const FreqOptions& o) {
    cli::RunOutputs out(g.out_dir, "freq");
    const auto files = cli::glob_files(o.images);
    if (files.empty()) throw DataError("no images match " + o.images);
    std::vector<std::string> ids;
    std::vector<GrayImage> images;
    for (const auto& f : files) {
        ids.push_back(f.stem().string());
        images.push_back(io::read_pgm(f));
        out.add_input(f);
    }
    out.add_parameter("images", o.images);
    out.add_parameter("bands", o.bands);
    const auto space = shift::frequency_space(ids, images, o.bands);
    out.add_file(o.out, to_text([&](std::ostream& os) { io::write_embeddings(os, space); }));
    out.commit(g.seed);
}

// ber ------------------------------------------------------------------------

struct BerOptions {
    std::string features;
    std::string labels;
    ber::BerParams params;
    std::string rule = "pure_neighborhood";
};

void run_ber(const Globals& g, BerOptions o) {
    cli::RunOutputs out(g.out_dir, "ber");
    const auto space = io::read_embeddings(o.features);
    const auto labels = io::read_labels(o.labels);
    out.add_input(o.features);
    out.add_input(o.labels);
    o.params.rule = ber::confidence_rule_from_string(o.rule);

    std::vector<int> y;
    for (const auto& id : space.ids()) {
        if (!labels.contains(id)) throw DataError("unlabeled id " + id);
        y.push_back(labels.at(id));
    }
    out.add_parameter("k", o.params.k);
    out.add_parameter("min_size", o.params.min_size);
    out.add_parameter("alpha", o.params.alpha);
    out.add_parameter("max_iter", o.params.max_iter);
    out.add_parameter("tol", o.params.tol);
    out.add_parameter("rule", o.rule);
    out.add_file("ber.json", report::dump(report::to_json(ber::estimate_ber(space.rows(), y, o.params))));
    out.commit(g.seed);
}

// probe ----------------------------------------------------------------------

struct ProbeOptions {
    std::string train;
    std::string test;
    std::string labels;
    std::string kind = "linear";
    probe::Hyperparams hp;
    double validation_fraction = 0.2;
    std::size_t seeds = 5;
};

probe::Dataset load_probe_data(const std::string& path, const std::optional<LabeledDataset>& labels) {
    if (fs::path(path).extension() == ".jsonl") {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("cannot open " + path);
        return probe::parse_sequences(in);
    }
    if (!labels) throw ParameterError(path + ": embedding CSV input needs --labels");
    return probe::from_embeddings(io::read_embeddings(path), *labels);
}

void run_probe(const Globals& g, const ProbeOptions& o) {
    cli::RunOutputs out(g.out_dir, "probe");
    if (o.seeds == 0) throw ParameterError("--seeds must be >= 1");
    std::optional<LabeledDataset> labels;
    if (!o.labels.empty()) {
        labels = io::read_labels(o.labels);
        out.add_input(o.labels);
    }
    const auto train_all = load_probe_data(o.train, labels);
    const auto test = load_probe_data(o.test, labels);
    out.add_input(o.train);
    out.add_input(o.test);
    const auto kind = probe::probe_kind_from_string(o.kind);

    out.add_parameter("kind", o.kind);
    out.add_parameter("validation_fraction", o.validation_fraction);
    out.add_parameter("seeds", o.seeds);
    out.add_parameter("hyperparams", report::to_json(probe::TrainReport{kind, 0, o.hp, {}, 0, 0.0})["hyperparams"]);

    std::vector<json> runs(o.seeds);
    std::vector<double> aucs(o.seeds);
    std::vector<std::string> errors(o.seeds);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t rr = 0; rr < static_cast<std::ptrdiff_t>(o.seeds); ++rr) {
        const auto r = static_cast<std::size_t>(rr);
        try {
            const std::uint64_t seed = g.seed + r;
            const auto [train, val] = probe::split_train_validation(train_all, o.validation_fraction, seed);
            auto [model, rep] = probe::train_probe(train, val, kind, o.hp, seed);
            const auto p = probe::serial::predict(model, test);
            std::vector<double> pos, neg;
            for (std::size_t i = 0; i < test.size(); ++i) {
                if (!test[i].label) throw DataError("test sequence " + test[i].id + " has no label");
                (*test[i].label ? pos : neg).push_back(p[i]);
            }
            if (pos.empty() || neg.empty()) throw DataError("test set needs both classes");
            const auto roc = eval::evaluate(pos, neg);
            aucs[r] = roc.auc;
            runs[r] = {{"seed", seed},
                       {"model", report::to_json(model)},
                       {"train", report::to_json(rep)},
                       {"test", report::to_json(roc)}};
        } catch (const std::exception& e) {
            errors[r] = e.what();
        }
    }
    for (const auto& e : errors)
        if (!e.empty()) throw DataError(e);

    const double n = static_cast<double>(aucs.size());
    const double mean = std::accumulate(aucs.begin(), aucs.end(), 0.0) / n;
    double ss = 0.0;
    for (double a : aucs) ss += (a - mean) * (a - mean);
    const double sd = aucs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    const json summary = {{"kind", o.kind}, {"runs", runs}, {"test_auc_mean", mean}, {"test_auc_std", sd}};
    out.add_file("probe.json", report::dump(summary));
    out.commit(g.seed);
}

// setinfer -------------------------------------------------------------------

struct SetInferOptions {
    std::string scores;
    std::string labels;
    std::vector<std::size_t> sizes = eval::kDefaultSetSizes;
    std::size_t n_sets = 1000;
    std::string aggregator = "mean";
};

void run_setinfer(const Globals& g, const SetInferOptions& o) {
    cli::RunOutputs out(g.out_dir, "setinfer");
    const auto table = io::read_scores(o.scores);
    const auto labels = io::read_labels(o.labels);
    out.add_input(o.scores);
    out.add_input(fs::path(o.scores).replace_extension(".meta.json"));
    out.add_input(o.labels);
    const auto agg = eval::aggregator_from_string(o.aggregator);
    out.add_parameter("sizes", o.sizes);
    out.add_parameter("n_sets", o.n_sets);
    out.add_parameter("aggregator", o.aggregator);
    const auto split = eval::split_by_label(table, labels);
    const auto curve = eval::sweep_set_sizes(split.members, split.nonmembers, o.sizes, o.n_sets, g.seed, agg);
    out.add_file("curve.json", report::dump(report::to_json(curve)));
    out.commit(g.seed);
}

// synth ----------------------------------------------------------------------

json config_json(const synth::SynthConfig& c) {
    return {{"n", c.n},
            {"dim", c.dim},
            {"delta", c.delta},
            {"signal", c.signal},
            {"vocab", c.vocab},
            {"length", c.length},
            {"instruction_steps", c.resolved_instruction_steps()},
            {"samples_per_image", c.samples_per_image},
            {"height", c.height},
            {"width", c.width},
            {"blur", c.blur}};
}

void run_synth(const Globals& g, const std::string& kind, synth::SynthConfig cfg) {
    cli::RunOutputs out(g.out_dir, "synth " + kind);
    cfg.seed = g.seed;
    cfg.validate();
    const json c = config_json(cfg);
    if (kind == "traces") {
        for (const char* key : {"n", "vocab", "length", "instruction_steps", "samples_per_image", "signal"})
            out.add_parameter(key, c[key]);
        const auto traces = synth::gen_traces(cfg);
        out.add_file("traces.jsonl", to_text([&](std::ostream& os) { io::write_traces(os, traces); }));
    } else if (kind == "images") {
        for (const char* key : {"n", "height", "width", "blur"}) out.add_parameter(key, c[key]);
        const auto sets = synth::gen_images(cfg);
        LabeledDataset labels;
        for (std::size_t i = 0; i < 2 * cfg.n; ++i) {
            const bool member = i < cfg.n;
            const auto& img = member ? sets.sharp[i] : sets.blurred[i - cfg.n];
            const auto id = synth::sample_id(i);
            out.add_file(id + ".pgm", to_text([&](std::ostream& os) { io::write_pgm(os, img); }));
            labels.add(id, member ? 1 : 0);
        }
        out.add_file("labels.csv", to_text([&](std::ostream& os) { io::write_labels(os, labels); }));
    } else {
        for (const char* key : {"n", "dim", "delta"}) out.add_parameter(key, c[key]);
        const auto [s1, s2] = synth::gen_shifted_embeddings(cfg);
        out.add_file("s1.csv", to_text([&](std::ostream& os) { io::write_embeddings(os, s1); }));
        out.add_file("s2.csv", to_text([&](std::ostream& os) { io::write_embeddings(os, s2); }));
    }
    out.commit(g.seed);
}

void print_error(const char* kind, const std::string& message) {
    std::cerr << json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Membership-inference auditing toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    app.config_formatter(std::make_shared<cli::JsonConfig>());
    app.set_config("--config", "", "JSON file of option values; command-line flags take precedence");
    app.set_version_flag("--version", VLAUDIT_VERSION);

    Globals g;
    app.add_option("--out-dir", g.out_dir, "Directory for outputs and manifest.json")->capture_default_str();
    app.add_option("--seed", g.seed, "Seed for every random draw")->capture_default_str();
    app.add_option("--threads", g.threads, "Thread cap (0 = runtime default)")->check(CLI::NonNegativeNumber);

    ScoreOptions so;
    auto* score = app.add_subcommand("score", "Per-sample MI scores from a trace file");
    score->add_option("--traces", so.traces, "Trace JSONL")->required();
    score->add_option("--method", so.method,
                      "perplexity | min_k | min_kpp | max_prob_gap | max_renyi_k | mod_renyi | image_only")
        ->required();
    score->add_option("--k", so.k, "Percentage of steps selected")->capture_default_str();
    score->add_option("--alpha", so.alpha, "Renyi order (inf allowed)")->capture_default_str();
    score->add_option("--segment", so.segment, "inst | desp | both")->capture_default_str();
    score->add_flag("--shannon", so.shannon, "Allow alpha = 1 (Shannon entropy)");
    score->add_option("--sweep-k", so.sweep, "start:stop:step; one table per K");

    EvalOptions eo;
    auto* evalc = app.add_subcommand("eval", "AUC, TPR@FPR and ROC curve of a score table");
    evalc->add_option("--scores", eo.scores, "Score CSV (sidecar .meta.json next to it)")->required();
    evalc->add_option("--labels", eo.labels, "Labels CSV")->required();
    evalc->add_option("--fpr", eo.fpr, "FPR targets")->capture_default_str();

    WiredOptions wo;
    auto* wiredc = app.add_subcommand("wired", "WiRED distribution-shift ratio across embedding spaces");
    wiredc->add_option("--space", wo.spaces, "name=s1.csv,s2.csv or name=all.csv (with --labels)")->required();
    wiredc->add_option("--labels", wo.labels, "Labels CSV; 1 -> S1, 0 -> S2");
    wiredc->add_option("--n-proj", wo.n_proj, "Projections per SWD")->capture_default_str();
    wiredc->add_option("--q", wo.q, "Wasserstein order")->capture_default_str();
    wiredc->add_option("--repeats", wo.repeats, "Random subset repeats")->capture_default_str();

    FreqOptions fo;
    auto* freq = app.add_subcommand("freq", "Band-energy features of PGM images");
    freq->add_option("--images", fo.images, "Glob, e.g. dir/*.pgm")->required();
    freq->add_option("--bands", fo.bands, "Number of bands K")->capture_default_str();
    freq->add_option("--out", fo.out, "Output CSV name inside --out-dir")->capture_default_str();

    BerOptions bo;
    auto* berc = app.add_subcommand("ber", "Graph-based Bayes error estimate");
    berc->add_option("--features", bo.features, "Embeddings CSV")->required();
    berc->add_option("--labels", bo.labels, "Labels CSV")->required();
    berc->add_option("--k", bo.params.k, "Neighbours per node")->capture_default_str();
    berc->add_option("--min-size", bo.params.min_size, "Smallest confident component")->capture_default_str();
    berc->add_option("--alpha", bo.params.alpha, "Spreading alpha")->capture_default_str();
    berc->add_option("--max-iter", bo.params.max_iter, "Spreading iteration cap")->capture_default_str();
    berc->add_option("--tol", bo.params.tol, "Spreading convergence tolerance")->capture_default_str();
    berc->add_option("--rule", bo.rule, "pure_neighborhood | same_label_components")->capture_default_str();

    ProbeOptions po;
    auto* probec = app.add_subcommand("probe", "Train and test membership probes over several seeds");
    probec->add_option("--train", po.train, "Sequences JSONL or embeddings CSV")->required();
    probec->add_option("--test", po.test, "Sequences JSONL or embeddings CSV")->required();
    probec->add_option("--labels", po.labels, "Labels CSV for embedding inputs");
    probec->add_option("--kind", po.kind, "linear | mlp | attention")->capture_default_str();
    probec->add_option("--hidden", po.hp.hidden, "MLP hidden width")->capture_default_str();
    probec->add_option("--lr", po.hp.learning_rate, "Adam learning rate")->capture_default_str();
    probec->add_option("--batch-size", po.hp.batch_size)->capture_default_str();
    probec->add_option("--epochs", po.hp.max_epochs, "Epoch cap")->capture_default_str();
    probec->add_option("--patience", po.hp.patience, "Early-stopping patience")->capture_default_str();
    probec->add_option("--validation-fraction", po.validation_fraction)->capture_default_str();
    probec->add_option("--seeds", po.seeds, "Runs with seeds seed, seed+1, ...")->capture_default_str();
    probec->add_flag("--standardize", po.hp.standardize, "Standardise features with training statistics");
    probec->add_flag("--freeze-query", po.hp.freeze_query, "Keep the attention query at zero");

    SetInferOptions io_;
    auto* setinfer = app.add_subcommand("setinfer", "Bootstrap set-level AUC by set size");
    setinfer->add_option("--scores", io_.scores, "Score CSV")->required();
    setinfer->add_option("--labels", io_.labels, "Labels CSV")->required();
    setinfer->add_option("--sizes", io_.sizes, "Set sizes")->delimiter(',')->capture_default_str();
    setinfer->add_option("--n-sets", io_.n_sets, "Sets drawn per class and size")->capture_default_str();
    setinfer->add_option("--aggregator", io_.aggregator, "mean | median | trimmed_mean")->capture_default_str();

    synth::SynthConfig sc;
    std::string synth_kind;
    auto* synthc = app.add_subcommand("synth", "Generate seeded fixtures");
    synthc->add_option("kind", synth_kind, "traces | images | embeddings")
        ->required()
        ->check(CLI::IsMember({"traces", "images", "embeddings"}));
    synthc->add_option("--n", sc.n, "Samples per class")->capture_default_str();
    synthc->add_option("--dim", sc.dim, "Embedding dimension")->capture_default_str();
    synthc->add_option("--delta", sc.delta, "S2 mean shift")->capture_default_str();
    synthc->add_option("--s,--signal", sc.signal, "Member top-logit sharpening")->capture_default_str();
    synthc->add_option("--vocab", sc.vocab, "Vocabulary size V")->capture_default_str();
    synthc->add_option("--length", sc.length, "Steps per trace T")->capture_default_str();
    synthc->add_option("--instruction-steps", sc.instruction_steps, "Leading instruction steps (default T/4)");
    synthc->add_option("--samples-per-image", sc.samples_per_image)->capture_default_str();
    synthc->add_option("--height", sc.height)->capture_default_str();
    synthc->add_option("--width", sc.width)->capture_default_str();
    synthc->add_option("--blur", sc.blur, "Box-blur radius of the second image set")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("usage", e.what());
        return 2;
    }

    try {
        if (g.threads > 0) set_thread_count(g.threads);
        if (*score) run_score(g, so);
        else if (*evalc) run_eval(g, eo);
        else if (*wiredc) run_wired(g, wo);
        else if (*freq) run_freq(g, fo);
        else if (*berc) run_ber(g, bo);
        else if (*probec) run_probe(g, po);
        else if (*setinfer) run_setinfer(g, io_);
        else if (*synthc) run_synth(g, synth_kind, sc);
    } catch (const Error& e) {
        print_error(e.kind(), e.what());
        return 1;
    } catch (const std::exception& e) {
        print_error("error", e.what());
        return 1;
    }
    return 0;
}
