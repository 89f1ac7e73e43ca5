#include "spectemp/errors.hpp"
#include "spectemp/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace spectemp::model {

namespace {

constexpr char kMagic[4] = {'S', 'T', 'G', 'C'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T take(std::istream& is) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DataError("checkpoint: truncated file");
    return v;
}

void put_array(std::ostream& os, const std::string& name, const Matrix& m) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(os, 2);
    put<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) put<double>(os, m(r, c));
}

} // namespace

void save_checkpoint(const std::string& path, const ModelConfig& config, const ModelState& state) {
    std::map<std::string, Matrix> arrays = state.params;
    arrays["buffer/adjacency"] = state.adjacency;
    arrays["buffer/shift"] = state.shift;
    Matrix modes(1, static_cast<Eigen::Index>(state.modes.size()));
    for (std::size_t i = 0; i < state.modes.size(); ++i) modes(0, static_cast<Eigen::Index>(i)) = state.modes[i];
    arrays["buffer/modes"] = modes;
    arrays["buffer/proj_forward_re"] = state.projector.forward_re;
    arrays["buffer/proj_forward_im"] = state.projector.forward_im;
    arrays["buffer/proj_inverse_re"] = state.projector.inverse_re;
    arrays["buffer/proj_inverse_im"] = state.projector.inverse_im;

    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("checkpoint: cannot open '" + path + "' for writing");
    os.write(kMagic, 4);
    put<std::uint32_t>(os, kVersion);
    const std::string cfg = to_json(config).dump();
    put<std::uint64_t>(os, cfg.size());
    os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(arrays.size()));
    for (const auto& [name, m] : arrays) put_array(os, name, m);
    if (!os) throw DataError("checkpoint: write to '" + path + "' failed");
}

std::pair<ModelConfig, ModelState> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open '" + path + "'");
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw DataError("checkpoint: bad magic");
    const auto version = take<std::uint32_t>(is);
    if (version != kVersion) throw DataError("checkpoint: unsupported version " + std::to_string(version));
    const auto cfg_len = take<std::uint64_t>(is);
    std::string cfg(cfg_len, '\0');
    if (!is.read(cfg.data(), static_cast<std::streamsize>(cfg_len))) throw DataError("checkpoint: truncated config");
    ModelConfig config;
    try {
        config = config_from_json(nlohmann::json::parse(cfg));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: config is not valid JSON: ") + e.what());
    }

    ModelState state;
    const auto count = take<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = take<std::uint32_t>(is);
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len)) throw DataError("checkpoint: truncated array name");
        const auto rank = take<std::uint32_t>(is);
        if (rank != 2) throw DataError("checkpoint: array '" + name + "' has rank " + std::to_string(rank));
        const auto rows = take<std::uint64_t>(is);
        const auto cols = take<std::uint64_t>(is);
        Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (std::uint64_t r = 0; r < rows; ++r)
            for (std::uint64_t c = 0; c < cols; ++c) m(r, c) = take<double>(is);
        if (name == "buffer/adjacency") {
            state.adjacency = m;
        } else if (name == "buffer/shift") {
            state.shift = m;
        } else if (name == "buffer/modes") {
            for (Eigen::Index c = 0; c < m.cols(); ++c) state.modes.push_back(static_cast<int>(m(0, c)));
        } else if (name == "buffer/proj_forward_re") {
            state.projector.forward_re = m;
        } else if (name == "buffer/proj_forward_im") {
            state.projector.forward_im = m;
        } else if (name == "buffer/proj_inverse_re") {
            state.projector.inverse_re = m;
        } else if (name == "buffer/proj_inverse_im") {
            state.projector.inverse_im = m;
        } else {
            state.params[name] = m;
        }
    }
    config.validate();
    return {config, state};
}

} // namespace spectemp::model
