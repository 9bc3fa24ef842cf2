#pragma once

// Versioned JSON model checkpoint: architecture, parameters in the canonical
// flat ordering, angle normalization, and the hash of the training config.

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>

#include "emgpinn/network.hpp"

namespace emgpinn {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    MlpParams params;
    NormSpec norm;
    std::string config_hash;
    std::string mode; // "pinn" or "ann"
};

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    ckpt.params.validate();
    nlohmann::json j;
    j["version"] = kCheckpointVersion;
    j["mode"] = ckpt.mode;
    j["config_hash"] = ckpt.config_hash;
    j["architecture"] = {{"input_dim", ckpt.params.arch.input_dim},
                         {"hidden_layers", ckpt.params.arch.hidden_layers},
                         {"hidden_width", ckpt.params.arch.hidden_width},
                         {"output_dim", ckpt.params.arch.output_dim}};
    Eigen::VectorXd flat = ckpt.params.flatten();
    std::vector<double> v(flat.data(), flat.data() + flat.size());
    j["parameters"] = v;
    j["norm"] = {{"angle_offset", {ckpt.norm.angle_offset[0], ckpt.norm.angle_offset[1]}},
                 {"angle_scale", {ckpt.norm.angle_scale[0], ckpt.norm.angle_scale[1]}}};
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
    f << j.dump() << "\n";
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
    nlohmann::json j;
    f >> j;
    if (j.value("version", -1) != kCheckpointVersion)
        throw std::runtime_error("load_checkpoint: unsupported version");
    Architecture arch;
    arch.input_dim = j.at("architecture").at("input_dim").get<int>();
    arch.hidden_layers = j.at("architecture").at("hidden_layers").get<int>();
    arch.hidden_width = j.at("architecture").at("hidden_width").get<int>();
    arch.output_dim = j.at("architecture").at("output_dim").get<int>();

    auto v = j.at("parameters").get<std::vector<double>>();
    Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());

    Checkpoint ckpt;
    ckpt.params = MlpParams::unflatten(arch, flat);
    ckpt.mode = j.value("mode", "");
    ckpt.config_hash = j.value("config_hash", "");
    ckpt.norm.input_offset = Eigen::VectorXd::Zero(arch.input_dim);
    ckpt.norm.input_scale = Eigen::VectorXd::Ones(arch.input_dim);
    for (int k = 0; k < 2; ++k) {
        ckpt.norm.angle_offset[k] = j.at("norm").at("angle_offset").at(k).get<double>();
        ckpt.norm.angle_scale[k] = j.at("norm").at("angle_scale").at(k).get<double>();
    }
    return ckpt;
}

} // namespace emgpinn
