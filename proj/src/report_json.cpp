#include "vlaudit/report_json.hpp"

namespace vlaudit::report {

json to_json(const shift::WiredReport& r) {
    json spaces = json::array();
    for (const auto& s : r.per_space)
        spaces.push_back({{"name", s.name},
                          {"ratio", s.ratio},
                          {"numerator", s.numerator},
                          {"denominator", s.denominator},
                          {"subset_size", s.subset_size},
                          {"repeats", s.repeats},
                          {"per_repeat", s.per_repeat}});
    return {{"per_space", spaces},
            {"final", r.final_score},
            {"seed", r.params.seed},
            {"n_proj", r.params.n_proj},
            {"q", r.params.q},
            {"repeats", r.params.repeats}};
}

json to_json(const ber::BerReport& r) {
    return {{"ber", r.ber},
            {"ber_uncertain", r.ber_uncertain},
            {"n", r.n},
            {"uncertain_count", r.uncertain_count},
            {"incorrect", r.incorrect},
            {"component_sizes", r.component_sizes},
            {"sigma", r.sigma},
            {"spread_iterations", r.spread_iterations},
            {"spread_converged", r.spread_converged},
            {"k", r.params.k},
            {"min_size", r.params.min_size},
            {"alpha", r.params.alpha},
            {"max_iter", r.params.max_iter},
            {"tol", r.params.tol},
            {"rule", ber::to_string(r.params.rule)}};
}

json to_json(const eval::RocResult& r) {
    json tpr = json::array();
    for (const auto& [fpr, t] : r.tpr_at_fpr) tpr.push_back({{"fpr", fpr}, {"tpr", t}});
    json curve = json::array();
    for (const auto& p : r.curve) curve.push_back({p.fpr, p.tpr});
    return {{"auc", r.auc}, {"tpr_at_fpr", tpr}, {"curve", curve}, {"n_pos", r.n_pos}, {"n_neg", r.n_neg}};
}

json to_json(const eval::SetInferenceCurve& c) {
    json points = json::array();
    for (std::size_t i = 0; i < c.set_sizes.size(); ++i)
        points.push_back({{"set_size", c.set_sizes[i]}, {"auc", c.auc_per_size[i]}});
    return {{"points", points},
            {"n_sets", c.n_sets},
            {"seed", c.seed},
            {"aggregator", eval::to_string(c.aggregator)}};
}

json to_json(const probe::ProbeModel& m) {
    json j = {{"kind", probe::to_string(m.kind)},
              {"input_dim", m.input_dim},
              {"hidden", m.hidden},
              {"parameters", m.flat()}};
    if (!m.feature_scale.empty()) {
        j["feature_mean"] = m.feature_mean;
        j["feature_scale"] = m.feature_scale;
    }
    return j;
}

probe::ProbeModel probe_model_from_json(const json& j) {
    try {
        probe::ProbeModel m;
        m.kind = probe::probe_kind_from_string(j.at("kind").get<std::string>());
        m.input_dim = j.at("input_dim").get<std::size_t>();
        m.hidden = j.at("hidden").get<std::size_t>();
        m.set_flat(j.at("parameters").get<std::vector<double>>());
        if (j.contains("feature_scale")) {
            m.feature_mean = j.at("feature_mean").get<std::vector<double>>();
            m.feature_scale = j.at("feature_scale").get<std::vector<double>>();
        }
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad probe model: ") + e.what());
    } catch (const Error& e) {
        throw ParseError(std::string("bad probe model: ") + e.what());
    }
}

json to_json(const probe::TrainReport& r) {
    json epochs = json::array();
    for (const auto& e : r.epochs)
        epochs.push_back({{"epoch", e.epoch},
                          {"train_loss", e.train_loss},
                          {"validation_loss", e.validation_loss},
                          {"train_auc", e.train_auc},
                          {"validation_auc", e.validation_auc}});
    const auto& hp = r.hyperparams;
    return {{"kind", probe::to_string(r.kind)},
            {"seed", r.seed},
            {"hyperparams",
             {{"hidden", hp.hidden},
              {"learning_rate", hp.learning_rate},
              {"batch_size", hp.batch_size},
              {"max_epochs", hp.max_epochs},
              {"patience", hp.patience},
              {"beta1", hp.beta1},
              {"beta2", hp.beta2},
              {"adam_eps", hp.adam_eps},
              {"freeze_query", hp.freeze_query},
              {"standardize", hp.standardize}}},
            {"epochs", epochs},
            {"best_epoch", r.best_epoch},
            {"best_validation_auc", r.best_validation_auc}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace vlaudit::report
