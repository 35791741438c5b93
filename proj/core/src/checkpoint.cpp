#include "floq/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace floq {

namespace {

constexpr const char* kMagic = "FLOQCKPT1";
constexpr int kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

void write_floats(std::ostream& out, const float* data, std::size_t n) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 4));
}

void read_floats(std::istream& in, float* data, std::size_t n) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * 4));
    require(in.good(), "io error: truncated checkpoint");
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParameters<float>& params,
                     const std::map<std::string, std::vector<float>>& extra,
                     const std::map<std::string, double>& metadata) {
    require(params.values.size() == parameter_count(params.hyper),
            "checkpoint error: parameter buffer does not match hyperparameters");
    nlohmann::json manifest;
    manifest["version"] = kFormatVersion;
    manifest["hyper"] = {{"layer_count", params.hyper.layer_count},
                         {"hidden_dim", params.hyper.hidden_dim}};
    nlohmann::json tensors = nlohmann::json::array();
    std::size_t byte_offset = 0;
    for (const TensorSpec& spec : parameter_layout(params.hyper)) {
        tensors.push_back({{"name", spec.name},
                           {"rows", spec.rows},
                           {"cols", spec.cols},
                           {"offset", byte_offset}});
        byte_offset += spec.count() * 4;
    }
    for (const auto& [name, values] : extra) {
        tensors.push_back({{"name", name},
                           {"rows", 1},
                           {"cols", values.size()},
                           {"offset", byte_offset}});
        byte_offset += values.size() * 4;
    }
    manifest["tensors"] = tensors;
    manifest["metadata"] = metadata;

    std::ofstream out(path, std::ios::binary);
    require(out.good(), "io error: cannot write " + path);
    out << kMagic << "\n" << manifest.dump() << "\n";
    for (const TensorSpec& spec : parameter_layout(params.hyper)) {
        write_floats(out, params.values.data() + spec.offset, spec.count());
    }
    for (const auto& [name, values] : extra) {
        write_floats(out, values.data(), values.size());
    }
    require(out.good(), "io error: failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "io error: cannot open " + path);
    std::string line;
    std::getline(in, line);
    require(line == kMagic, "io error: " + path + " is not a checkpoint file");
    std::getline(in, line);
    nlohmann::json manifest = nlohmann::json::parse(line, nullptr, false);
    require(!manifest.is_discarded(), "io error: bad checkpoint manifest in " + path);
    require(manifest.at("version").get<int>() == kFormatVersion,
            "checkpoint error: unsupported format version");

    Checkpoint ckpt;
    ckpt.params.hyper.layer_count = manifest.at("hyper").at("layer_count").get<std::uint32_t>();
    ckpt.params.hyper.hidden_dim = manifest.at("hyper").at("hidden_dim").get<std::uint32_t>();
    check_hyper(ckpt.params.hyper);
    ckpt.params.values.assign(parameter_count(ckpt.params.hyper), 0.0f);
    if (manifest.contains("metadata")) {
        for (const auto& [k, v] : manifest.at("metadata").items()) {
            ckpt.metadata[k] = v.get<double>();
        }
    }

    const std::vector<TensorSpec> expected = parameter_layout(ckpt.params.hyper);
    const auto& tensors = manifest.at("tensors");
    require(tensors.size() >= expected.size(), "checkpoint error: missing model tensors");
    std::size_t byte_offset = 0;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        const auto& t = tensors[i];
        const auto name = t.at("name").get<std::string>();
        const auto rows = t.at("rows").get<std::uint64_t>();
        const auto cols = t.at("cols").get<std::uint64_t>();
        require(t.at("offset").get<std::size_t>() == byte_offset,
                "checkpoint error: tensor offset mismatch for " + name);
        const std::size_t count = rows * cols;
        if (i < expected.size()) {
            const TensorSpec& spec = expected[i];
            require(name == spec.name && rows == spec.rows && cols == spec.cols,
                    "checkpoint error: tensor " + name + " does not match expected shape of " +
                        spec.name);
            read_floats(in, ckpt.params.values.data() + spec.offset, count);
        } else {
            std::vector<float> values(count);
            read_floats(in, values.data(), count);
            ckpt.extra.emplace(name, std::move(values));
        }
        byte_offset += count * 4;
    }
    return ckpt;
}

}  // namespace floq
