#include "brdfnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "brdfnet/error.hpp"

namespace brdfnet {

namespace fs = std::filesystem;
using nlohmann::json;

std::int64_t Checkpoint::parameter_count() const {
    std::int64_t n = 0;
    for (const auto& t : tensors) n += std::int64_t(t.data.size());
    return n;
}

void import_check(const std::string& expected_name, Eigen::Index rows, Eigen::Index cols, const NamedTensor& t) {
    require(t.name == expected_name && t.rows == rows && t.cols == cols, "checkpoint",
            "tensor '" + t.name + "' does not match model tensor '" + expected_name + "'");
}

std::uint64_t save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
    static_assert(std::endian::native == std::endian::little, "checkpoints are written little-endian");
    json header = ckpt.header;
    json list = json::array();
    for (const auto& t : ckpt.tensors) {
        require(std::size_t(t.rows * t.cols) == t.data.size(), "checkpoint", "tensor '" + t.name + "' has a bad shape");
        list.push_back({{"name", t.name}, {"shape", {t.rows, t.cols}}});
    }
    header["tensors"] = list;
    header["parameter_count"] = ckpt.parameter_count();
    const std::string text = header.dump();
    const std::uint64_t len = text.size();

    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    require(bool(out), "io", "cannot write " + path.string());
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), std::streamsize(text.size()));
    std::uint64_t bytes = sizeof(kCheckpointMagic) + sizeof(len) + len;
    for (const auto& t : ckpt.tensors) {
        out.write(reinterpret_cast<const char*>(t.data.data()), std::streamsize(t.data.size() * sizeof(float)));
        bytes += t.data.size() * sizeof(float);
    }
    require(bool(out), "io", "write failed: " + path.string());
    return bytes;
}

Checkpoint load_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(bool(in), "io", "cannot read " + path.string());
    char magic[sizeof(kCheckpointMagic)];
    std::uint64_t len = 0;
    in.read(magic, sizeof(magic));
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    require(bool(in) && std::memcmp(magic, kCheckpointMagic, sizeof(magic)) == 0, "checkpoint",
            "not a checkpoint: " + path.string());
    require(len < (1u << 26), "checkpoint", "corrupt checkpoint header: " + path.string());
    std::string text(len, '\0');
    in.read(text.data(), std::streamsize(len));
    require(bool(in), "checkpoint", "truncated checkpoint header: " + path.string());

    Checkpoint ckpt;
    try {
        ckpt.header = json::parse(text);
        for (const auto& t : ckpt.header.at("tensors")) {
            NamedTensor nt;
            nt.name = t.at("name").get<std::string>();
            nt.rows = t.at("shape").at(0).get<Eigen::Index>();
            nt.cols = t.at("shape").at(1).get<Eigen::Index>();
            require(nt.rows >= 0 && nt.cols >= 0, "checkpoint", "negative tensor shape");
            nt.data.resize(std::size_t(nt.rows * nt.cols));
            in.read(reinterpret_cast<char*>(nt.data.data()), std::streamsize(nt.data.size() * sizeof(float)));
            require(bool(in), "checkpoint", "truncated tensor '" + nt.name + "' in " + path.string());
            ckpt.tensors.push_back(std::move(nt));
        }
    } catch (const json::exception& e) {
        throw Error("checkpoint", "corrupt checkpoint header in " + path.string() + ": " + e.what());
    }
    require(in.peek() == EOF, "checkpoint", "trailing bytes in " + path.string());
    ckpt.header.erase("tensors");
    return ckpt;
}

}  // namespace brdfnet
