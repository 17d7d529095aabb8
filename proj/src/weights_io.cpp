#include "resdual/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "resdual/version.hpp"

namespace resdual {

namespace {

constexpr char kMagic[4] = {'R', 'D', 'W', 'T'};

// host is assumed little-endian (checked nowhere cheaper than here)
static_assert(std::endian::native == std::endian::little,
              "weight files are little-endian; big-endian hosts are unsupported");

template <typename V>
void put(std::string& buf, V v) {
    char raw[sizeof v];
    std::memcpy(raw, &v, sizeof v);
    buf.append(raw, sizeof v);
}

struct Cursor {
    const std::string& buf;
    std::size_t pos = 0;

    template <typename V>
    V take(const char* what) {
        if (pos + sizeof(V) > buf.size())
            throw io_error(std::string("weights file: truncated reading ") + what);
        V v;
        std::memcpy(&v, buf.data() + pos, sizeof v);
        pos += sizeof v;
        return v;
    }

    std::string take_bytes(std::size_t n, const char* what) {
        if (pos + n > buf.size())
            throw io_error(std::string("weights file: truncated reading ") + what);
        std::string s(buf.data() + pos, n);
        pos += n;
        return s;
    }
};

}  // namespace

void save_weights(const std::string& path, const ModelConfig& cfg, const ModelWeights& w) {
    std::string buf;
    buf.append(kMagic, sizeof kMagic);
    put<std::uint32_t>(buf, kWeightsFormatVersion);
    put<std::int64_t>(buf, cfg.L);
    put<std::int64_t>(buf, cfg.T);
    put<std::int64_t>(buf, cfg.d);
    put<std::int64_t>(buf, cfg.mlp_hidden);
    put<std::uint8_t>(buf, static_cast<std::uint8_t>(cfg.mixer.kind));
    put<std::int64_t>(buf, cfg.mixer.window);
    put<std::uint8_t>(buf, cfg.mixer.depth_params_shared ? 1 : 0);
    put<std::uint64_t>(buf, cfg.seed);

    std::uint64_t count = 0;
    for_each_weight(w, cfg, [&](const std::string&, const Tensor&, Shape, WeightInit) { ++count; });
    put<std::uint64_t>(buf, count);
    for_each_weight(w, cfg,
                    [&](const std::string& name, const Tensor& t, Shape expect, WeightInit) {
                        if (!(t.shape() == expect))
                            throw dimension_error("save_weights: " + name + " has shape " +
                                                  t.shape().str() + ", expected " + expect.str());
                        put<std::uint32_t>(buf, static_cast<std::uint32_t>(name.size()));
                        buf.append(name);
                        put<std::uint8_t>(buf, static_cast<std::uint8_t>(t.rank()));
                        for (int a = 0; a < t.rank(); ++a) put<std::int64_t>(buf, t.dim(a));
                        for (std::int64_t i = 0; i < t.numel(); ++i)
                            put<double>(buf, t.data()[i]);
                    });

    write_file_atomic(path, buf);
    write_file_atomic(path + ".json", weights_sidecar_json(cfg, w).dump(2) + "\n");
}

std::pair<ModelConfig, ModelWeights> load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("weights file: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Cursor c{buf};

    const std::string magic = c.take_bytes(sizeof kMagic, "magic");
    if (std::memcmp(magic.data(), kMagic, sizeof kMagic) != 0)
        throw io_error("weights file: bad magic in " + path);
    const auto fmt = c.take<std::uint32_t>("format version");
    if (fmt != kWeightsFormatVersion)
        throw io_error("weights file: format version " + std::to_string(fmt) + ", expected " +
                       std::to_string(kWeightsFormatVersion));

    ModelConfig cfg;
    cfg.L = c.take<std::int64_t>("L");
    cfg.T = c.take<std::int64_t>("T");
    cfg.d = c.take<std::int64_t>("d");
    cfg.mlp_hidden = c.take<std::int64_t>("mlp_hidden");
    const auto kind = c.take<std::uint8_t>("mixer");
    if (kind > static_cast<std::uint8_t>(Mixer::denseformer))
        throw io_error("weights file: unknown mixer tag " + std::to_string(kind));
    cfg.mixer.kind = static_cast<Mixer>(kind);
    cfg.mixer.window = c.take<std::int64_t>("window");
    cfg.mixer.depth_params_shared = c.take<std::uint8_t>("depth_params_shared") != 0;
    cfg.seed = c.take<std::uint64_t>("seed");
    validate_config(cfg);

    const auto count = c.take<std::uint64_t>("tensor count");
    ModelWeights w;
    std::uint64_t seen = 0;
    for_each_weight(w, cfg, [&](const std::string& name, Tensor& slot, Shape expect, WeightInit) {
        ++seen;
        const auto name_len = c.take<std::uint32_t>("tensor name length");
        const std::string stored = c.take_bytes(name_len, "tensor name");
        if (stored != name)
            throw io_error("weights file: tensor " + std::to_string(seen - 1) + " is '" + stored +
                           "', expected '" + name + "'");
        const auto rank = c.take<std::uint8_t>("tensor rank");
        if (rank != expect.rank)
            throw io_error("weights file: " + name + " has rank " + std::to_string(rank) +
                           ", expected " + std::to_string(expect.rank));
        Shape got = expect;
        for (int a = 0; a < rank; ++a) got.dim[a] = c.take<std::int64_t>("tensor dim");
        if (!(got == expect))
            throw io_error("weights file: " + name + " has shape " + got.str() + ", expected " +
                           expect.str());
        std::vector<double> values(expect.numel());
        for (double& v : values) v = c.take<double>("tensor data");
        slot = Tensor::from_data(expect, std::move(values));
    });
    if (seen != count)
        throw io_error("weights file: header promises " + std::to_string(count) +
                       " tensors, config implies " + std::to_string(seen));
    if (c.pos != buf.size())
        throw io_error("weights file: " + std::to_string(buf.size() - c.pos) +
                       " trailing bytes in " + path);
    return {cfg, std::move(w)};
}

ordered_json weights_sidecar_json(const ModelConfig& cfg, const ModelWeights& w) {
    ordered_json j;
    j["report"] = "weights-sidecar";
    j["version"] = kVersion;
    j["format_version"] = kWeightsFormatVersion;
    ordered_json c;
    c["L"] = cfg.L;
    c["T"] = cfg.T;
    c["d"] = cfg.d;
    c["mlp_hidden"] = cfg.mlp_hidden;
    c["mixer"] = mixer_name(cfg.mixer.kind);
    c["window"] = window_json(cfg.mixer.window);
    c["depth_params_shared"] = cfg.mixer.depth_params_shared;
    c["seed"] = cfg.seed;
    j["config"] = std::move(c);
    ordered_json tensors = ordered_json::array();
    for_each_weight(w, cfg, [&](const std::string& name, const Tensor& t, Shape, WeightInit) {
        ordered_json e;
        e["name"] = name;
        ordered_json dims = ordered_json::array();
        for (int a = 0; a < t.rank(); ++a) dims.push_back(t.dim(a));
        e["shape"] = std::move(dims);
        tensors.push_back(std::move(e));
    });
    j["tensors"] = std::move(tensors);
    return j;
}

}  // namespace resdual
