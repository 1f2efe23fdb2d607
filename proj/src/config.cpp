#include "prdim/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace prdim {

namespace {

using nlohmann::json;

json parse_strict(const std::string& text) {
    std::vector<std::set<std::string>> object_keys;
    json::parser_callback_t cb = [&](int /*depth*/, json::parse_event_t event, json& parsed) {
        if (event == json::parse_event_t::object_start) {
            object_keys.emplace_back();
        } else if (event == json::parse_event_t::object_end) {
            object_keys.pop_back();
        } else if (event == json::parse_event_t::key) {
            std::string key = parsed.get<std::string>();
            if (!object_keys.back().insert(key).second) {
                throw std::runtime_error("config: duplicate key '" + key + "'");
            }
        }
        return true;
    };
    return json::parse(text, cb);
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw std::runtime_error("config: unknown key '" + where + it.key() + "'");
        }
    }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

MechanismKind mechanism_kind_from(const std::string& s) {
    if (s == "none") return MechanismKind::none;
    if (s == "mcar") return MechanismKind::mcar;
    if (s == "mar") return MechanismKind::mar;
    if (s == "mnar_logistic") return MechanismKind::mnar_logistic;
    if (s == "mnar_quantile") return MechanismKind::mnar_quantile;
    if (s == "mnar_self_censor") return MechanismKind::mnar_self_censor;
    if (s == "mnar_latent") return MechanismKind::mnar_latent;
    if (s == "mnar_truncation") return MechanismKind::mnar_truncation;
    throw std::runtime_error("config: unknown mechanism kind '" + s + "'");
}

std::string mechanism_kind_name(MechanismKind k) {
    switch (k) {
        case MechanismKind::none: return "none";
        case MechanismKind::mcar: return "mcar";
        case MechanismKind::mar: return "mar";
        case MechanismKind::mnar_logistic: return "mnar_logistic";
        case MechanismKind::mnar_quantile: return "mnar_quantile";
        case MechanismKind::mnar_self_censor: return "mnar_self_censor";
        case MechanismKind::mnar_latent: return "mnar_latent";
        case MechanismKind::mnar_truncation: return "mnar_truncation";
    }
    return "?";
}

MechanismSpec parse_mechanism(const json& j) {
    if (!j.contains("kind")) throw std::runtime_error("config: missing required key 'mechanism.kind'");
    MechanismSpec spec;
    spec.kind = mechanism_kind_from(j.at("kind").get<std::string>());
    std::set<std::string> allowed = {"kind"};
    switch (spec.kind) {
        case MechanismKind::none: break;
        case MechanismKind::mcar: allowed.insert("p"); break;
        case MechanismKind::mar: allowed.insert({"driver_columns", "slope", "offset"}); break;
        case MechanismKind::mnar_logistic:
        case MechanismKind::mnar_self_censor: allowed.insert({"w", "b"}); break;
        case MechanismKind::mnar_quantile: allowed.insert({"q", "feature_fraction"}); break;
        case MechanismKind::mnar_latent: allowed.insert({"latent_dim", "effect_scale", "w", "b"}); break;
        case MechanismKind::mnar_truncation: allowed.insert({"lower", "upper"}); break;
    }
    reject_unknown(j, allowed, "mechanism.");
    spec.p = get_or(j, "p", spec.p);
    spec.w = get_or(j, "w", spec.w);
    spec.b = get_or(j, "b", spec.b);
    spec.q = get_or(j, "q", spec.q);
    spec.feature_fraction = get_or(j, "feature_fraction", spec.feature_fraction);
    spec.latent_dim = get_or(j, "latent_dim", spec.latent_dim);
    spec.effect_scale = get_or(j, "effect_scale", spec.effect_scale);
    spec.lower = get_or(j, "lower", spec.lower);
    spec.upper = get_or(j, "upper", spec.upper);
    spec.driver_columns = get_or(j, "driver_columns", spec.driver_columns);
    spec.slope = get_or(j, "slope", spec.slope);
    spec.offset = get_or(j, "offset", spec.offset);
    return spec;
}

json mechanism_to_json(const MechanismSpec& spec) {
    json j;
    j["kind"] = mechanism_kind_name(spec.kind);
    switch (spec.kind) {
        case MechanismKind::none: break;
        case MechanismKind::mcar: j["p"] = spec.p; break;
        case MechanismKind::mar:
            j["driver_columns"] = spec.driver_columns;
            j["slope"] = spec.slope;
            j["offset"] = spec.offset;
            break;
        case MechanismKind::mnar_logistic:
        case MechanismKind::mnar_self_censor:
            j["w"] = spec.w;
            j["b"] = spec.b;
            break;
        case MechanismKind::mnar_quantile:
            j["q"] = spec.q;
            j["feature_fraction"] = spec.feature_fraction;
            break;
        case MechanismKind::mnar_latent:
            j["latent_dim"] = spec.latent_dim;
            j["effect_scale"] = spec.effect_scale;
            j["w"] = spec.w;
            j["b"] = spec.b;
            break;
        case MechanismKind::mnar_truncation:
            j["lower"] = spec.lower;
            j["upper"] = spec.upper;
            break;
    }
    return j;
}

OptimizerKind optimizer_from(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw std::runtime_error("config: unknown optimizer '" + s + "'");
}

} // namespace

ExperimentConfig parse_config(const std::string& text) {
    json j = parse_strict(text);
    if (!j.is_object()) throw std::runtime_error("config: top level must be an object");
    reject_unknown(j,
                   {"data", "mechanism", "split", "schedule", "phase1", "recognizer", "em", "eval",
                    "guidance_sweep", "output_dir", "seed"},
                   "");
    std::vector<std::string> missing;
    if (!j.contains("data")) missing.push_back("data");
    if (!j.contains("mechanism")) missing.push_back("mechanism");
    if (!missing.empty()) {
        std::string list;
        for (const auto& k : missing) list += (list.empty() ? "" : ", ") + k;
        throw std::runtime_error("config: missing required key(s): " + list);
    }

    ExperimentConfig cfg;
    const json& data = j.at("data");
    std::string kind = data.contains("kind") ? data.at("kind").get<std::string>() : "synthetic";
    if (kind == "synthetic") {
        cfg.data_kind = DataKind::synthetic;
        reject_unknown(data, {"kind", "ar_coeff", "noise_std", "features", "window_len", "stride", "total_steps"},
                       "data.");
        cfg.synthetic.ar_coeff = get_or(data, "ar_coeff", cfg.synthetic.ar_coeff);
        cfg.synthetic.noise_std = get_or(data, "noise_std", cfg.synthetic.noise_std);
        cfg.synthetic.features = get_or(data, "features", cfg.synthetic.features);
        cfg.synthetic.window_len = get_or(data, "window_len", cfg.synthetic.window_len);
        cfg.synthetic.stride = get_or(data, "stride", cfg.synthetic.stride);
        cfg.synthetic.total_steps = get_or(data, "total_steps", cfg.synthetic.total_steps);
    } else if (kind == "csv") {
        cfg.data_kind = DataKind::csv;
        reject_unknown(data, {"kind", "path", "has_header", "missing_token", "window_len", "stride"}, "data.");
        if (!data.contains("path")) throw std::runtime_error("config: missing required key 'data.path'");
        cfg.csv.path = data.at("path").get<std::string>();
        cfg.csv.has_header = get_or(data, "has_header", cfg.csv.has_header);
        cfg.csv.missing_token = get_or(data, "missing_token", cfg.csv.missing_token);
        cfg.csv.window_len = get_or(data, "window_len", cfg.csv.window_len);
        cfg.csv.stride = get_or(data, "stride", cfg.csv.window_len);
    } else {
        throw std::runtime_error("config: unknown data kind '" + kind + "'");
    }

    cfg.mechanism = parse_mechanism(j.at("mechanism"));

    if (j.contains("split")) {
        const json& s = j.at("split");
        reject_unknown(s, {"train", "valid", "test", "shuffle"}, "split.");
        cfg.split.train = get_or(s, "train", cfg.split.train);
        cfg.split.valid = get_or(s, "valid", cfg.split.valid);
        cfg.split.test = get_or(s, "test", cfg.split.test);
        cfg.split.shuffle = get_or(s, "shuffle", cfg.split.shuffle);
    }
    if (j.contains("schedule")) {
        const json& s = j.at("schedule");
        reject_unknown(s, {"steps", "beta_min", "beta_max", "kind"}, "schedule.");
        cfg.schedule.steps = get_or(s, "steps", cfg.schedule.steps);
        cfg.schedule.beta_min = get_or(s, "beta_min", cfg.schedule.beta_min);
        cfg.schedule.beta_max = get_or(s, "beta_max", cfg.schedule.beta_max);
        std::string sk = get_or<std::string>(s, "kind", "quadratic");
        if (sk == "quadratic") {
            cfg.schedule.kind = ScheduleKind::quadratic;
        } else if (sk == "linear") {
            cfg.schedule.kind = ScheduleKind::linear;
        } else {
            throw std::runtime_error("config: unknown schedule kind '" + sk + "'");
        }
    }
    if (j.contains("phase1")) {
        const json& p = j.at("phase1");
        reject_unknown(p,
                       {"epochs", "batch", "lr", "artificial_fraction", "resample_mask_per_epoch", "hidden",
                        "embed_dim", "optimizer"},
                       "phase1.");
        cfg.phase1.epochs = get_or(p, "epochs", cfg.phase1.epochs);
        cfg.phase1.batch = get_or(p, "batch", cfg.phase1.batch);
        cfg.phase1.lr = get_or(p, "lr", cfg.phase1.lr);
        cfg.phase1.artificial_fraction = get_or(p, "artificial_fraction", cfg.phase1.artificial_fraction);
        cfg.phase1.resample_mask_per_epoch =
            get_or(p, "resample_mask_per_epoch", cfg.phase1.resample_mask_per_epoch);
        cfg.phase1.hidden_dims = get_or(p, "hidden", cfg.phase1.hidden_dims);
        cfg.phase1.embed_dim = get_or(p, "embed_dim", cfg.phase1.embed_dim);
        cfg.phase1.optimizer = optimizer_from(get_or<std::string>(p, "optimizer", "adam"));
    }
    if (j.contains("recognizer")) {
        const json& r = j.at("recognizer");
        reject_unknown(r, {"hidden", "init"}, "recognizer.");
        cfg.recognizer_hidden = get_or(r, "hidden", cfg.recognizer_hidden);
        std::string init = get_or<std::string>(r, "init", "random");
        if (init == "random") {
            cfg.recognizer_init = RecognizerInit::random;
        } else if (init == "zeros") {
            cfg.recognizer_init = RecognizerInit::zeros;
        } else {
            throw std::runtime_error("config: unknown recognizer init '" + init + "'");
        }
    }
    if (j.contains("em")) {
        const json& e = j.at("em");
        reject_unknown(e,
                       {"iterations", "maximization_epochs", "lr_theta", "lr_phi", "guidance_scale",
                        "guidance_path", "mode", "soft_samples", "grad_clip_norm", "batch", "optimizer"},
                       "em.");
        cfg.em.iterations = get_or(e, "iterations", cfg.em.iterations);
        cfg.em.maximization_epochs = get_or(e, "maximization_epochs", cfg.em.maximization_epochs);
        cfg.em.lr_theta = get_or(e, "lr_theta", cfg.em.lr_theta);
        cfg.em.lr_phi = get_or(e, "lr_phi", cfg.em.lr_phi);
        cfg.em.guidance_scale = get_or(e, "guidance_scale", cfg.em.guidance_scale);
        std::string gp = get_or<std::string>(e, "guidance_path", "full_chain");
        if (gp == "full_chain") {
            cfg.em.guidance_path = GuidancePath::full_chain;
        } else if (gp == "x0hat_only") {
            cfg.em.guidance_path = GuidancePath::x0hat_only;
        } else {
            throw std::runtime_error("config: unknown guidance path '" + gp + "'");
        }
        std::string mode = get_or<std::string>(e, "mode", "hard");
        if (mode == "hard") {
            cfg.em.mode = EmMode::hard;
        } else if (mode == "soft") {
            cfg.em.mode = EmMode::soft;
        } else {
            throw std::runtime_error("config: unknown em mode '" + mode + "'");
        }
        cfg.em.soft_samples = get_or(e, "soft_samples", cfg.em.soft_samples);
        cfg.em.grad_clip_norm = get_or(e, "grad_clip_norm", cfg.em.grad_clip_norm);
        cfg.em.batch = get_or(e, "batch", cfg.em.batch);
        cfg.em.optimizer = optimizer_from(get_or<std::string>(e, "optimizer", "adam"));
    }
    if (j.contains("eval")) {
        const json& e = j.at("eval");
        reject_unknown(e, {"standardized_space", "compute_w2", "w2_cap", "artificial_fraction"}, "eval.");
        cfg.eval.standardized_space = get_or(e, "standardized_space", cfg.eval.standardized_space);
        cfg.eval.compute_w2 = get_or(e, "compute_w2", cfg.eval.compute_w2);
        cfg.eval.w2_cap = get_or(e, "w2_cap", cfg.eval.w2_cap);
        cfg.eval.artificial_fraction = get_or(e, "artificial_fraction", cfg.eval.artificial_fraction);
    }
    cfg.guidance_sweep = get_or(j, "guidance_sweep", cfg.guidance_sweep);
    cfg.output_dir = get_or(j, "output_dir", cfg.output_dir);
    cfg.seed = get_or(j, "seed", cfg.seed);
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
    json j;
    if (cfg.data_kind == DataKind::synthetic) {
        j["data"] = {{"kind", "synthetic"},
                     {"ar_coeff", cfg.synthetic.ar_coeff},
                     {"noise_std", cfg.synthetic.noise_std},
                     {"features", cfg.synthetic.features},
                     {"window_len", cfg.synthetic.window_len},
                     {"stride", cfg.synthetic.stride},
                     {"total_steps", cfg.synthetic.total_steps}};
    } else {
        j["data"] = {{"kind", "csv"},
                     {"path", cfg.csv.path},
                     {"has_header", cfg.csv.has_header},
                     {"missing_token", cfg.csv.missing_token},
                     {"window_len", cfg.csv.window_len},
                     {"stride", cfg.csv.stride}};
    }
    j["mechanism"] = mechanism_to_json(cfg.mechanism);
    j["split"] = {{"train", cfg.split.train},
                  {"valid", cfg.split.valid},
                  {"test", cfg.split.test},
                  {"shuffle", cfg.split.shuffle}};
    j["schedule"] = {{"steps", cfg.schedule.steps},
                     {"beta_min", cfg.schedule.beta_min},
                     {"beta_max", cfg.schedule.beta_max},
                     {"kind", cfg.schedule.kind == ScheduleKind::quadratic ? "quadratic" : "linear"}};
    j["phase1"] = {{"epochs", cfg.phase1.epochs},
                   {"batch", cfg.phase1.batch},
                   {"lr", cfg.phase1.lr},
                   {"artificial_fraction", cfg.phase1.artificial_fraction},
                   {"resample_mask_per_epoch", cfg.phase1.resample_mask_per_epoch},
                   {"hidden", cfg.phase1.hidden_dims},
                   {"embed_dim", cfg.phase1.embed_dim},
                   {"optimizer", cfg.phase1.optimizer == OptimizerKind::adam ? "adam" : "sgd"}};
    j["recognizer"] = {{"hidden", cfg.recognizer_hidden},
                       {"init", cfg.recognizer_init == RecognizerInit::random ? "random" : "zeros"}};
    j["em"] = {{"iterations", cfg.em.iterations},
               {"maximization_epochs", cfg.em.maximization_epochs},
               {"lr_theta", cfg.em.lr_theta},
               {"lr_phi", cfg.em.lr_phi},
               {"guidance_scale", cfg.em.guidance_scale},
               {"guidance_path", cfg.em.guidance_path == GuidancePath::full_chain ? "full_chain" : "x0hat_only"},
               {"mode", cfg.em.mode == EmMode::hard ? "hard" : "soft"},
               {"soft_samples", cfg.em.soft_samples},
               {"grad_clip_norm", cfg.em.grad_clip_norm},
               {"batch", cfg.em.batch},
               {"optimizer", cfg.em.optimizer == OptimizerKind::adam ? "adam" : "sgd"}};
    j["eval"] = {{"standardized_space", cfg.eval.standardized_space},
                 {"compute_w2", cfg.eval.compute_w2},
                 {"w2_cap", cfg.eval.w2_cap},
                 {"artificial_fraction", cfg.eval.artificial_fraction}};
    j["guidance_sweep"] = cfg.guidance_sweep;
    j["output_dir"] = cfg.output_dir;
    j["seed"] = cfg.seed;
    return j.dump(1);
}

std::string config_hash(const ExperimentConfig& cfg) {
    std::uint64_t h = fnv1a64(serialize_config(cfg));
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016llx", (unsigned long long)h);
    return buf;
}

} // namespace prdim
