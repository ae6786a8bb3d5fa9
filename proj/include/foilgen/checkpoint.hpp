#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "foilgen/error.hpp"
#include "foilgen/text.hpp"
#include "foilgen/vaegan.hpp"

// Binary layout, all integers little-endian:
//   magic "FOILGENCKPT\0" | u32 len + version tag | u32 len + metadata text
//   u32 tensor count | per tensor: u32 len + name, u32 rank, u64 dims, f64 data
//   u64 FNV-1a checksum of everything before it
namespace foilgen {

inline constexpr char kCheckpointMagic[12] = {'F', 'O', 'I', 'L', 'G', 'E', 'N', 'C', 'K', 'P', 'T', '\0'};
inline constexpr const char* kCheckpointVersion = "v1";

namespace detail {

template <typename T>
void put_le(std::string& out, T v) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

inline void put_str(std::string& out, std::string_view s) {
    put_le(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += sizeof(T);
        return static_cast<T>(v);
    }

    double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }

    std::string get_str() {
        const auto n = get<std::uint32_t>();
        need(n);
        std::string s(data_.substr(pos_, n));
        pos_ += n;
        return s;
    }

    std::string_view bytes(std::size_t n) {
        need(n);
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) throw Error(Errc::MalformedFile, "checkpoint ends unexpectedly");
    }
    std::string_view data_;
    std::size_t pos_ = 0;
};

struct NamedTensor {
    std::string name;
    std::vector<std::uint64_t> dims;
    std::vector<double> data;
};

inline void collect(std::vector<NamedTensor>& out, const std::string& prefix, const nn::Mlp& net) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const auto& layer = net.layers[l];
        NamedTensor w{prefix + "." + std::to_string(l) + ".weight",
                      {static_cast<std::uint64_t>(layer.weights.rows()), static_cast<std::uint64_t>(layer.weights.cols())},
                      {}};
        // Row-major on disk.
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) w.data.push_back(layer.weights(r, c));
        NamedTensor b{prefix + "." + std::to_string(l) + ".bias", {static_cast<std::uint64_t>(layer.bias.size())},
                      std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())};
        out.push_back(std::move(w));
        out.push_back(std::move(b));
    }
}

inline void restore(nn::Mlp& net, const std::string& prefix, const std::map<std::string, NamedTensor>& tensors) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& layer = net.layers[l];
        const auto wn = prefix + "." + std::to_string(l) + ".weight";
        const auto bn = prefix + "." + std::to_string(l) + ".bias";
        auto wi = tensors.find(wn);
        auto bi = tensors.find(bn);
        if (wi == tensors.end() || bi == tensors.end()) throw Error(Errc::MalformedFile, "checkpoint lacks tensor " + wn);
        const auto& w = wi->second;
        const auto& b = bi->second;
        if (w.dims.size() != 2 || w.dims[0] != static_cast<std::uint64_t>(layer.weights.rows()) ||
            w.dims[1] != static_cast<std::uint64_t>(layer.weights.cols()))
            throw Error(Errc::ShapeMismatch, "tensor " + wn + " has the wrong shape");
        if (b.dims.size() != 1 || b.dims[0] != static_cast<std::uint64_t>(layer.bias.size()))
            throw Error(Errc::ShapeMismatch, "tensor " + bn + " has the wrong shape");
        std::size_t k = 0;
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = w.data[k++];
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = b.data[static_cast<std::size_t>(i)];
    }
    net.touch();
}

inline std::string metadata_text(const ModelCheckpoint& c) {
    const auto& k = c.config;
    std::ostringstream os;
    auto f = [](double v) { return text::format_double(v); };
    os << "kind=" << model_kind_name(c.kind) << "\n"
       << "scale=" << f(c.scale) << "\n"
       << "epoch=" << c.epoch << "\n"
       << "rng_summary=" << c.rng_summary << "\n"
       << "epochs=" << k.epochs << "\n"
       << "lr_initial=" << f(k.lr_initial) << "\n"
       << "lr_after_decay=" << f(k.lr_after_decay) << "\n"
       << "decay_epoch=" << k.decay_epoch << "\n"
       << "batch_size=" << k.batch_size << "\n"
       << "lambda_prior=" << f(k.lambda_prior) << "\n"
       << "lambda_layer=" << f(k.lambda_layer) << "\n"
       << "lambda_recon=" << f(k.lambda_recon) << "\n"
       << "lambda_gan_dec=" << f(k.lambda_gan_dec) << "\n"
       << "seed=" << k.seed << "\n";
    return os.str();
}

inline std::map<std::string, std::string> parse_metadata(std::string_view s) {
    std::map<std::string, std::string> kv;
    for (auto line : text::lines(s)) {
        auto t = text::trim(line);
        if (t.empty()) continue;
        auto eq = t.find('=');
        if (eq == std::string_view::npos) throw Error(Errc::MalformedFile, "bad checkpoint metadata line");
        kv.emplace(std::string(t.substr(0, eq)), std::string(t.substr(eq + 1)));
    }
    return kv;
}

inline const std::string& meta(const std::map<std::string, std::string>& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw Error(Errc::MalformedFile, "checkpoint metadata lacks '" + key + "'");
    return it->second;
}

inline double meta_double(const std::map<std::string, std::string>& kv, const std::string& key) {
    auto v = text::parse_double(meta(kv, key));
    if (!v) throw Error(Errc::MalformedFile, "checkpoint metadata '" + key + "' is not a number");
    return *v;
}

inline std::uint64_t meta_u64(const std::map<std::string, std::string>& kv, const std::string& key) {
    const auto& s = meta(kv, key);
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw Error(Errc::MalformedFile, "checkpoint metadata '" + key + "' is not an integer");
    return v;
}

}  // namespace detail

/// Serializes with an explicit version tag; tests use it to produce old-version files.
inline std::string checkpoint_to_bytes(const ModelCheckpoint& c, std::string_view version = kCheckpointVersion) {
    std::vector<detail::NamedTensor> tensors;
    detail::collect(tensors, "encoder.trunk", c.encoder.trunk);
    detail::collect(tensors, "encoder.mu", c.encoder.head_mu);
    detail::collect(tensors, "encoder.logvar", c.encoder.head_logvar);
    detail::collect(tensors, "decoder", c.decoder.net);
    if (c.discriminator) detail::collect(tensors, "discriminator", c.discriminator->net);

    std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::put_str(out, version);
    detail::put_str(out, detail::metadata_text(c));
    detail::put_le(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        detail::put_str(out, t.name);
        detail::put_le(out, static_cast<std::uint32_t>(t.dims.size()));
        for (auto d : t.dims) detail::put_le(out, d);
        for (double v : t.data) detail::put_f64(out, v);
    }
    detail::put_le(out, fnv1a64(out.data(), out.size()));
    return out;
}

inline ModelCheckpoint checkpoint_from_bytes(std::string_view bytes) {
    if (bytes.size() < sizeof(kCheckpointMagic) + 8) throw Error(Errc::CorruptChecksum, "checkpoint is truncated");
    const auto body = bytes.substr(0, bytes.size() - 8);
    detail::Reader tail(bytes.substr(bytes.size() - 8));
    if (tail.get<std::uint64_t>() != fnv1a64(body.data(), body.size()))
        throw Error(Errc::CorruptChecksum, "checkpoint checksum does not match its contents");

    detail::Reader r(body);
    if (r.bytes(sizeof(kCheckpointMagic)) != std::string_view(kCheckpointMagic, sizeof(kCheckpointMagic)))
        throw Error(Errc::MalformedFile, "not a foilgen checkpoint");
    const auto version = r.get_str();
    if (version != kCheckpointVersion)
        throw Error(Errc::VersionMismatch, "checkpoint version '" + version + "', reader expects '" + kCheckpointVersion + "'");
    const auto kv = detail::parse_metadata(r.get_str());

    std::map<std::string, detail::NamedTensor> tensors;
    const auto count = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        detail::NamedTensor t;
        t.name = r.get_str();
        const auto rank = r.get<std::uint32_t>();
        if (rank > 4) throw Error(Errc::MalformedFile, "tensor rank too large");
        std::uint64_t n = 1;
        for (std::uint32_t k = 0; k < rank; ++k) {
            t.dims.push_back(r.get<std::uint64_t>());
            n *= t.dims.back();
        }
        if (n > body.size()) throw Error(Errc::MalformedFile, "tensor larger than file");
        t.data.resize(n);
        for (auto& v : t.data) v = r.get_f64();
        tensors.emplace(t.name, std::move(t));
    }
    if (!r.done()) throw Error(Errc::MalformedFile, "trailing bytes in checkpoint");

    ModelCheckpoint c;
    const auto& kind = detail::meta(kv, "kind");
    if (kind == "vaegan")
        c.kind = ModelKind::Vaegan;
    else if (kind == "vae")
        c.kind = ModelKind::Vae;
    else
        throw Error(Errc::MalformedFile, "unknown model kind '" + kind + "'");
    c.scale = detail::meta_double(kv, "scale");
    c.epoch = static_cast<std::int64_t>(detail::meta_u64(kv, "epoch"));
    c.rng_summary = detail::meta_u64(kv, "rng_summary");
    auto& k = c.config;
    k.epochs = static_cast<int>(detail::meta_u64(kv, "epochs"));
    k.lr_initial = detail::meta_double(kv, "lr_initial");
    k.lr_after_decay = detail::meta_double(kv, "lr_after_decay");
    k.decay_epoch = static_cast<int>(detail::meta_u64(kv, "decay_epoch"));
    k.batch_size = static_cast<int>(detail::meta_u64(kv, "batch_size"));
    k.lambda_prior = detail::meta_double(kv, "lambda_prior");
    k.lambda_layer = detail::meta_double(kv, "lambda_layer");
    k.lambda_recon = detail::meta_double(kv, "lambda_recon");
    k.lambda_gan_dec = detail::meta_double(kv, "lambda_gan_dec");
    k.seed = detail::meta_u64(kv, "seed");

    // Build correctly shaped networks, then overwrite every parameter.
    std::mt19937_64 shape_rng(0);
    c.encoder = make_encoder(shape_rng);
    c.decoder = make_decoder(shape_rng);
    detail::restore(c.encoder.trunk, "encoder.trunk", tensors);
    detail::restore(c.encoder.head_mu, "encoder.mu", tensors);
    detail::restore(c.encoder.head_logvar, "encoder.logvar", tensors);
    detail::restore(c.decoder.net, "decoder", tensors);
    if (c.kind == ModelKind::Vaegan) {
        c.discriminator = make_discriminator(shape_rng);
        detail::restore(c.discriminator->net, "discriminator", tensors);
    }
    return c;
}

/// Names of the tensors stored in a checkpoint, in file order.
inline std::vector<std::string> checkpoint_tensor_names(std::string_view bytes) {
    if (bytes.size() < sizeof(kCheckpointMagic) + 8) throw Error(Errc::CorruptChecksum, "checkpoint is truncated");
    detail::Reader r(bytes.substr(0, bytes.size() - 8));
    r.bytes(sizeof(kCheckpointMagic));
    r.get_str();
    r.get_str();
    std::vector<std::string> names;
    const auto count = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        names.push_back(r.get_str());
        const auto rank = r.get<std::uint32_t>();
        std::uint64_t n = 1;
        for (std::uint32_t k = 0; k < rank; ++k) n *= r.get<std::uint64_t>();
        r.bytes(n * 8);
    }
    return names;
}

inline void save_checkpoint(const ModelCheckpoint& c, const std::string& path) {
    const auto bytes = checkpoint_to_bytes(c);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoFailure, "cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::IoFailure, "write failed for " + path);
}

inline std::string read_binary_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoFailure, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline ModelCheckpoint load_checkpoint(const std::string& path) { return checkpoint_from_bytes(read_binary_file(path)); }

}  // namespace foilgen
