#include "semlp/serialize.hpp"

#include <bit>
#include <cstring>
#include <map>
#include <string>
#include <string_view>
#include <type_traits>

#include <fmt/format.h>

#include "semlp/error.hpp"
#include "semlp/io.hpp"

namespace semlp {

namespace {

constexpr std::string_view kModelMagic = "SEMLPMOD";
constexpr std::string_view kNormMagic = "SEMLPNRM";

class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
    void raw(std::span<const std::uint8_t> s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s);
    }
    std::size_t size() const { return bytes_.size(); }
    std::vector<std::uint8_t>& bytes() { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint8_t u8() { return take(1)[0]; }
    std::uint32_t u32() {
        const auto b = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
        }
        return v;
    }
    std::uint64_t u64() {
        const auto b = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
        }
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::span<const std::uint8_t> take(std::size_t n) {
        if (bytes_.size() - pos_ < n) {
            throw LoadError(LoadFailure::truncated, fmt::format("need {} bytes at offset {}, only {} left", n, pos_,
                                                                bytes_.size() - pos_));
        }
        const auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    std::string str() {
        const std::uint32_t n = u32();
        const auto s = take(n);
        return {s.begin(), s.end()};
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

// Header: magic[8] version:u32 payload_size:u64, then payload, then crc32 of all prior bytes.
std::vector<std::uint8_t> wrap(std::string_view magic, std::uint32_t version, std::span<const std::uint8_t> payload) {
    ByteWriter w;
    w.raw(magic);
    w.u32(version);
    w.u64(payload.size());
    w.raw(payload);
    w.u32(crc32_of(std::span<const std::uint8_t>(w.bytes())));
    return std::move(w.bytes());
}

std::span<const std::uint8_t> unwrap(std::span<const std::uint8_t> bytes, std::string_view magic,
                                     std::uint32_t version, const char* what) {
    constexpr std::size_t header = 8 + 4 + 8;
    if (bytes.size() < header + 4) {
        throw LoadError(LoadFailure::truncated, fmt::format("{}: {} bytes is shorter than the header", what, bytes.size()));
    }
    if (std::memcmp(bytes.data(), magic.data(), magic.size()) != 0) {
        throw LoadError(LoadFailure::bad_magic, fmt::format("{}: not a {} container", what, magic));
    }
    ByteReader r(bytes.subspan(8));
    const std::uint32_t found_version = r.u32();
    if (found_version != version) {
        throw LoadError(LoadFailure::version_mismatch,
                        fmt::format("{}: format version {}, this build reads {}", what, found_version, version));
    }
    const std::uint64_t payload_size = r.u64();
    if (bytes.size() - header - 4 < payload_size) {
        throw LoadError(LoadFailure::truncated, fmt::format("{}: payload of {} bytes is cut short", what, payload_size));
    }
    if (bytes.size() != header + payload_size + 4) {
        throw LoadError(LoadFailure::malformed, fmt::format("{}: trailing bytes after the checksum", what));
    }
    const std::size_t body = header + static_cast<std::size_t>(payload_size);
    ByteReader tail(bytes.subspan(body));
    if (tail.u32() != crc32_of(bytes.first(body))) {
        throw LoadError(LoadFailure::checksum, fmt::format("{}: checksum does not match contents", what));
    }
    return bytes.subspan(header, static_cast<std::size_t>(payload_size));
}

std::uint32_t trailer_crc(std::span<const std::uint8_t> container) {
    ByteReader r(container.last(4));
    return r.u32();
}

void put_matrix(ByteWriter& w, const std::string& name, std::size_t rows, std::size_t cols,
                std::span<const double> data) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(rows));
    w.u32(static_cast<std::uint32_t>(cols));
    for (const double v : data) {
        w.f64(v);
    }
}

template <typename T>
struct TensorSlot {
    std::size_t rows;
    std::size_t cols;
    std::span<T> data;
};

// Every stored tensor of a model, keyed by name, in a fixed write order.
template <typename ModelT>
auto tensor_slots(ModelT& m) {
    using Value = std::conditional_t<std::is_const_v<ModelT>, const double, double>;
    std::vector<std::pair<std::string, TensorSlot<Value>>> out;
    const auto dense = [&out](const std::string& prefix, auto& p) {
        out.push_back({prefix + ".weight", {p.weight.rows(), p.weight.cols(), p.weight.data()}});
        out.push_back({prefix + ".bias", {1, p.bias.size(), std::span<Value>(p.bias)}});
    };
    for (std::size_t b = 0; b < 3; ++b) {
        auto& block = m.blocks()[b];
        const std::string prefix = "block" + std::to_string(b + 1);
        dense(prefix + ".dense", block.dense);
        const std::size_t n = block.norm.features();
        out.push_back({prefix + ".norm.gamma", {1, n, std::span<Value>(block.norm.gamma)}});
        out.push_back({prefix + ".norm.beta", {1, n, std::span<Value>(block.norm.beta)}});
        out.push_back({prefix + ".norm.running_mean", {1, n, std::span<Value>(block.norm.running_mean)}});
        out.push_back({prefix + ".norm.running_var", {1, n, std::span<Value>(block.norm.running_var)}});
        if (block.se) {
            dense(prefix + ".se.reduce", block.se->reduce);
            dense(prefix + ".se.expand", block.se->expand);
        }
    }
    if (m.residual_projection()) {
        dense("residual", *m.residual_projection());
    }
    dense("head", m.head());
    return out;
}

} // namespace

std::vector<std::uint8_t> serialize_norm_params(const NormParams& np) {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(kInputFeatures));
    for (const double v : np.x_min) {
        w.f64(v);
    }
    for (const double v : np.x_max) {
        w.f64(v);
    }
    w.f64(np.log_max);
    w.f64(np.width_max);
    return wrap(kNormMagic, kNormFormatVersion, w.bytes());
}

NormParams deserialize_norm_params(std::span<const std::uint8_t> bytes) {
    ByteReader r(unwrap(bytes, kNormMagic, kNormFormatVersion, "norm params"));
    const std::uint32_t features = r.u32();
    if (features != kInputFeatures) {
        throw LoadError(LoadFailure::malformed, fmt::format("norm params: {} features, expected {}", features, kInputFeatures));
    }
    NormParams np;
    for (double& v : np.x_min) {
        v = r.f64();
    }
    for (double& v : np.x_max) {
        v = r.f64();
    }
    np.log_max = r.f64();
    np.width_max = r.f64();
    if (!r.done()) {
        throw LoadError(LoadFailure::malformed, "norm params: unexpected trailing payload");
    }
    try {
        np.validate();
    } catch (const NormalizationError& e) {
        throw LoadError(LoadFailure::invariant, e.what());
    }
    return np;
}

std::uint32_t norm_params_checksum(const NormParams& np) { return trailer_crc(serialize_norm_params(np)); }

void persist_norm_params(const NormParams& np, const std::filesystem::path& path) {
    write_file_atomic(path, std::span<const std::uint8_t>(serialize_norm_params(np)));
}

NormParams load_norm_params(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw LoadError(LoadFailure::io, "norm params file not found: " + path.string());
    }
    return deserialize_norm_params(read_binary_file(path));
}

std::vector<std::uint8_t> serialize_model(const SEMLPModel& model) {
    const SEMLPConfig& c = model.config();
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(c.input_dim));
    for (const std::size_t h : c.hidden_dims) {
        w.u32(static_cast<std::uint32_t>(h));
    }
    w.u32(static_cast<std::uint32_t>(c.reduction_ratio));
    w.f64(c.dropout_rate);
    w.u8(c.use_se ? 1 : 0);
    w.u8(c.use_residual ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(c.output_dim));
    w.f64(model.blocks()[0].norm.momentum);
    w.f64(model.blocks()[0].norm.epsilon);
    if (model.norm_params()) {
        const auto norm = serialize_norm_params(*model.norm_params());
        w.u8(1);
        w.u32(trailer_crc(norm));
        w.u32(static_cast<std::uint32_t>(norm.size()));
        w.raw(norm);
    } else {
        w.u8(0);
    }
    const auto slots = tensor_slots(model);
    w.u32(static_cast<std::uint32_t>(slots.size()));
    for (const auto& [name, slot] : slots) {
        put_matrix(w, name, slot.rows, slot.cols, slot.data);
    }
    return wrap(kModelMagic, kModelFormatVersion, w.bytes());
}

SEMLPModel deserialize_model(std::span<const std::uint8_t> bytes) {
    ByteReader r(unwrap(bytes, kModelMagic, kModelFormatVersion, "model"));
    SEMLPConfig c;
    c.input_dim = r.u32();
    for (std::size_t& h : c.hidden_dims) {
        h = r.u32();
    }
    c.reduction_ratio = r.u32();
    c.dropout_rate = r.f64();
    c.use_se = r.u8() != 0;
    c.use_residual = r.u8() != 0;
    c.output_dim = r.u32();
    const double momentum = r.f64();
    const double epsilon = r.f64();
    SEMLPModel m;
    try {
        Rng unused(0);
        m = SEMLPModel::build(c, unused);
        for (Block& block : m.blocks()) {
            block.norm = BatchNormState(block.norm.features(), momentum, epsilon);
        }
    } catch (const ConfigError& e) {
        throw LoadError(LoadFailure::malformed, std::string("model: stored config is invalid: ") + e.what());
    }
    if (r.u8() != 0) {
        const std::uint32_t recorded = r.u32();
        const std::uint32_t size = r.u32();
        const auto norm_bytes = r.take(size);
        const NormParams np = deserialize_norm_params(norm_bytes);
        if (trailer_crc(norm_bytes) != recorded) {
            throw LoadError(LoadFailure::checksum, "model: embedded norm params do not match their recorded checksum");
        }
        m.set_norm_params(np);
    }
    std::map<std::string, TensorSlot<double>> slots;
    for (auto& [name, slot] : tensor_slots(m)) {
        slots.emplace(name, slot);
    }
    const std::uint32_t count = r.u32();
    if (count != slots.size()) {
        throw LoadError(LoadFailure::malformed, fmt::format("model: {} tensors stored, config needs {}", count, slots.size()));
    }
    for (std::uint32_t t = 0; t < count; ++t) {
        const std::string name = r.str();
        const std::size_t rows = r.u32();
        const std::size_t cols = r.u32();
        const auto it = slots.find(name);
        if (it == slots.end() || it->second.rows != rows || it->second.cols != cols) {
            throw LoadError(LoadFailure::malformed, fmt::format("model: unexpected tensor '{}' ({}x{})", name, rows, cols));
        }
        for (double& v : it->second.data) {
            v = r.f64();
        }
        slots.erase(it);
    }
    if (!r.done()) {
        throw LoadError(LoadFailure::malformed, "model: unexpected trailing payload");
    }
    return m;
}

void save_model(const SEMLPModel& model, const std::filesystem::path& path) {
    write_file_atomic(path, std::span<const std::uint8_t>(serialize_model(model)));
}

SEMLPModel load_model(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw LoadError(LoadFailure::io, "model file not found: " + path.string());
    }
    return deserialize_model(read_binary_file(path));
}

SEMLPModel load_paired(const std::filesystem::path& model_path, const std::filesystem::path& norm_path) {
    SEMLPModel model = load_model(model_path);
    const NormParams np = load_norm_params(norm_path);
    if (!model.norm_params()) {
        throw LoadError(LoadFailure::pairing, "model " + model_path.string() + " records no norm params");
    }
    const std::uint32_t expected = norm_params_checksum(*model.norm_params());
    const std::uint32_t found = norm_params_checksum(np);
    if (expected != found) {
        throw LoadError(LoadFailure::pairing,
                        fmt::format("{} (crc {:08x}) is not the parameter file of {} (expects crc {:08x})",
                                    norm_path.string(), found, model_path.string(), expected));
    }
    model.set_norm_params(np);
    return model;
}

} // namespace semlp
