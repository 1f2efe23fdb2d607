#include "prdim/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace prdim {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

json mlp_to_json(const Mlp& net) {
    json j;
    j["layer_dims"] = net.layer_dims;
    j["hidden_activation"] = net.hidden_activation == Activation::relu ? "relu" : "silu";
    j["output_activation"] = net.output_activation == OutputActivation::identity ? "identity" : "sigmoid";
    json layers = json::array();
    for (const auto& l : net.layers) {
        layers.push_back({{"w", l.w.values}, {"b", l.b.values}});
    }
    j["layers"] = std::move(layers);
    return j;
}

Mlp mlp_from_json(const json& j) {
    Mlp net;
    net.layer_dims = j.at("layer_dims").get<std::vector<std::size_t>>();
    std::string ha = j.at("hidden_activation").get<std::string>();
    net.hidden_activation = ha == "relu" ? Activation::relu : Activation::silu;
    std::string oa = j.at("output_activation").get<std::string>();
    net.output_activation = oa == "identity" ? OutputActivation::identity : OutputActivation::sigmoid;
    const json& layers = j.at("layers");
    for (std::size_t l = 0; l + 1 < net.layer_dims.size(); ++l) {
        DenseLayer layer;
        layer.w = Tensor({net.layer_dims[l], net.layer_dims[l + 1]},
                         layers.at(l).at("w").get<std::vector<double>>());
        layer.b = Tensor({net.layer_dims[l + 1]}, layers.at(l).at("b").get<std::vector<double>>());
        net.layers.push_back(std::move(layer));
    }
    return net;
}

std::string guidance_path_name(GuidancePath p) {
    return p == GuidancePath::full_chain ? "full_chain" : "x0hat_only";
}

} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    json j;
    j["format_version"] = kFormatVersion;
    j["data_dim"] = ckpt.denoiser.data_dim;
    j["denoiser"] = {{"embed_dim", ckpt.denoiser.embed_dim}, {"net", mlp_to_json(ckpt.denoiser.net)}};
    j["recognizer"] = {{"net", mlp_to_json(ckpt.recognizer.net)}};
    j["norm_stats"] = {{"mean", ckpt.stats.mean}, {"std", ckpt.stats.std}};
    j["schedule"] = {{"steps", ckpt.schedule_steps},
                     {"beta_min", ckpt.beta_min},
                     {"beta_max", ckpt.beta_max},
                     {"kind", ckpt.schedule_kind == ScheduleKind::quadratic ? "quadratic" : "linear"}};
    if (ckpt.axis_meta) {
        j["axis_meta"] = {{"features", ckpt.axis_meta->features}, {"steps", ckpt.axis_meta->steps}};
    } else {
        j["axis_meta"] = nullptr;
    }
    j["em"] = {{"guidance_scale", ckpt.em.guidance_scale},
               {"guidance_path", guidance_path_name(ckpt.em.guidance_path)},
               {"mode", ckpt.em.mode == EmMode::hard ? "hard" : "soft"},
               {"soft_samples", ckpt.em.soft_samples},
               {"grad_clip_norm", ckpt.em.grad_clip_norm}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    out << j.dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    json j = json::parse(in);
    int version = j.at("format_version").get<int>();
    if (version != kFormatVersion) {
        throw std::runtime_error("unsupported checkpoint format version " + std::to_string(version));
    }
    Checkpoint ckpt;
    ckpt.denoiser.data_dim = j.at("data_dim").get<std::size_t>();
    ckpt.denoiser.embed_dim = j.at("denoiser").at("embed_dim").get<std::size_t>();
    ckpt.denoiser.net = mlp_from_json(j.at("denoiser").at("net"));
    ckpt.recognizer.net = mlp_from_json(j.at("recognizer").at("net"));
    ckpt.stats.mean = j.at("norm_stats").at("mean").get<std::vector<double>>();
    ckpt.stats.std = j.at("norm_stats").at("std").get<std::vector<double>>();
    const json& sched = j.at("schedule");
    ckpt.schedule_steps = sched.at("steps").get<std::size_t>();
    ckpt.beta_min = sched.at("beta_min").get<double>();
    ckpt.beta_max = sched.at("beta_max").get<double>();
    ckpt.schedule_kind =
        sched.at("kind").get<std::string>() == "linear" ? ScheduleKind::linear : ScheduleKind::quadratic;
    if (!j.at("axis_meta").is_null()) {
        ckpt.axis_meta = AxisMeta{j.at("axis_meta").at("features").get<std::size_t>(),
                                  j.at("axis_meta").at("steps").get<std::size_t>()};
    }
    const json& em = j.at("em");
    ckpt.em.guidance_scale = em.at("guidance_scale").get<double>();
    ckpt.em.guidance_path = em.at("guidance_path").get<std::string>() == "x0hat_only"
                                ? GuidancePath::x0hat_only
                                : GuidancePath::full_chain;
    ckpt.em.mode = em.at("mode").get<std::string>() == "soft" ? EmMode::soft : EmMode::hard;
    ckpt.em.soft_samples = em.at("soft_samples").get<std::size_t>();
    ckpt.em.grad_clip_norm = em.at("grad_clip_norm").get<double>();
    return ckpt;
}

} // namespace prdim
