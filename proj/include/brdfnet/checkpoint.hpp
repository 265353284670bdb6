#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "brdfnet/error.hpp"
#include "brdfnet/nn/tensor.hpp"

namespace brdfnet {

struct NamedTensor {
    std::string name;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    std::vector<float> data;  // row-major
};

/// File layout: 8-byte magic, little-endian u64 header length, JSON header, then one
/// float32 blob per tensor in header order.
struct Checkpoint {
    nlohmann::json header;  // architecture tag, configs, normalization statistics
    std::vector<NamedTensor> tensors;

    std::int64_t parameter_count() const;
};

inline constexpr char kCheckpointMagic[8] = {'B', 'R', 'D', 'F', 'N', 'E', 'T', '1'};

/// Returns the number of bytes written.
std::uint64_t save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

template <class S>
std::vector<NamedTensor> export_tensors(const nn::ParamList<S>& params) {
    std::vector<NamedTensor> out;
    for (const auto& p : params) {
        NamedTensor t{p.name, p.value->rows(), p.value->cols(), {}};
        t.data.reserve(std::size_t(p.value->size()));
        for (Eigen::Index i = 0; i < p.value->size(); ++i) t.data.push_back(float(p.value->data()[i]));
        out.push_back(std::move(t));
    }
    return out;
}

void import_check(const std::string& expected_name, Eigen::Index rows, Eigen::Index cols, const NamedTensor& t);

template <class S>
void import_tensors(const nn::ParamList<S>& params, const std::vector<NamedTensor>& tensors) {
    require(params.size() == tensors.size(), "checkpoint", "checkpoint tensor count does not match the model");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& p = params[i];
        import_check(p.name, p.value->rows(), p.value->cols(), tensors[i]);
        for (Eigen::Index k = 0; k < p.value->size(); ++k) p.value->data()[k] = S(tensors[i].data[std::size_t(k)]);
    }
}

}  // namespace brdfnet
