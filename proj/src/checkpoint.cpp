#include "vstain/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written as host little-endian doubles");

using nlohmann::json;

namespace vstain {

namespace {

constexpr char kMagic[8] = {'V', 'S', 'C', 'K', 'P', 'T', '0', '1'};

struct Entry {
    std::string name;
    const Tensor* tensor;
};

json manifest_entry(const Entry& e, uint64_t offset) {
    json t;
    t["name"] = e.name;
    t["shape"] = e.tensor->shape;
    t["dtype"] = "f64";
    t["offset"] = offset;
    t["bytes"] = uint64_t(e.tensor->numel()) * sizeof(double);
    return t;
}

void write_u64(std::ostream& os, uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

uint64_t read_u64(std::istream& is) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const nn::ParamStore& params,
                     const RunConfig& config, int64_t step, const nn::AdamW* opt,
                     const nn::Ema* ema) {
    std::vector<Entry> entries;
    for (const auto& [name, var] : params.entries()) entries.push_back({name, &var->value});
    if (opt != nullptr) {
        const auto* m = &opt->moments_m();
        const auto* v = &opt->moments_v();
        if (m->size() != params.entries().size())
            throw std::invalid_argument("save_checkpoint: optimizer/param count mismatch");
        for (size_t i = 0; i < m->size(); ++i) {
            entries.push_back({"__opt_m__" + params.entries()[i].first, &(*m)[i]});
            entries.push_back({"__opt_v__" + params.entries()[i].first, &(*v)[i]});
        }
    }
    if (ema != nullptr) {
        for (size_t i = 0; i < ema->shadows().size(); ++i)
            entries.push_back({"__ema__" + params.entries()[i].first, &ema->shadows()[i]});
    }

    json man;
    man["version"] = 1;
    man["fingerprint"] = config.fingerprint();
    man["step"] = step;
    man["optimizer_step_count"] = opt != nullptr ? opt->step_count() : int64_t(0);
    man["has_optimizer"] = opt != nullptr;
    man["has_ema"] = ema != nullptr;
    man["ema_decay"] = ema != nullptr ? ema->decay() : 0.0;
    man["tensors"] = json::array();
    uint64_t offset = 0;
    for (const auto& e : entries) {
        man["tensors"].push_back(manifest_entry(e, offset));
        offset += uint64_t(e.tensor->numel()) * sizeof(double);
    }
    const std::string text = man.dump();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
    os.write(kMagic, sizeof kMagic);
    write_u64(os, text.size());
    os.write(text.data(), std::streamsize(text.size()));
    for (const auto& e : entries)
        os.write(reinterpret_cast<const char*>(e.tensor->ptr()),
                 std::streamsize(e.tensor->numel() * int64_t(sizeof(double))));
    if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

namespace {

json read_manifest(std::istream& is, const std::string& path) {
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const uint64_t len = read_u64(is);
    std::string text(len, '\0');
    is.read(text.data(), std::streamsize(len));
    if (!is) throw std::runtime_error("checkpoint: truncated manifest in " + path);
    return json::parse(text);
}

CheckpointInfo info_from(const json& man) {
    CheckpointInfo info;
    info.step = man.at("step").get<int64_t>();
    info.fingerprint = man.at("fingerprint").get<std::string>();
    info.has_optimizer = man.at("has_optimizer").get<bool>();
    info.has_ema = man.at("has_ema").get<bool>();
    return info;
}

}  // namespace

CheckpointInfo peek_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    return info_from(read_manifest(is, path));
}

CheckpointInfo load_checkpoint(const std::string& path, nn::ParamStore& params,
                               const RunConfig& config, bool ignore_fingerprint, nn::AdamW* opt,
                               nn::Ema* ema) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    const json man = read_manifest(is, path);
    CheckpointInfo info = info_from(man);
    if (man.at("version").get<int>() != 1)
        throw std::runtime_error("checkpoint: unsupported version");
    if (!ignore_fingerprint && info.fingerprint != config.fingerprint())
        throw std::runtime_error("checkpoint: config fingerprint mismatch (" + info.fingerprint +
                                 " vs " + config.fingerprint() +
                                 "); pass the override flag to load anyway");

    const std::streampos payload_start = is.tellg();
    std::map<std::string, std::pair<std::vector<int64_t>, uint64_t>> index;  // name -> shape, off
    for (const auto& t : man.at("tensors")) {
        if (t.at("dtype").get<std::string>() != "f64")
            throw std::runtime_error("checkpoint: unsupported dtype");
        index[t.at("name").get<std::string>()] = {t.at("shape").get<std::vector<int64_t>>(),
                                                  t.at("offset").get<uint64_t>()};
    }
    auto read_into = [&](const std::string& name, Tensor& dst) {
        auto it = index.find(name);
        if (it == index.end()) throw std::runtime_error("checkpoint: missing tensor " + name);
        if (it->second.first != dst.shape)
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        is.seekg(payload_start + std::streamoff(it->second.second));
        is.read(reinterpret_cast<char*>(dst.ptr()),
                std::streamsize(dst.numel() * int64_t(sizeof(double))));
        if (!is) throw std::runtime_error("checkpoint: truncated payload at " + name);
    };

    for (auto& [name, var] : params.entries()) read_into(name, var->value);
    if (opt != nullptr) {
        if (!info.has_optimizer)
            throw std::runtime_error("checkpoint: optimizer state requested but absent");
        for (size_t i = 0; i < params.entries().size(); ++i) {
            read_into("__opt_m__" + params.entries()[i].first, opt->moments_m()[i]);
            read_into("__opt_v__" + params.entries()[i].first, opt->moments_v()[i]);
        }
        opt->set_step_count(man.at("optimizer_step_count").get<int64_t>());
    }
    if (ema != nullptr) {
        if (!info.has_ema) throw std::runtime_error("checkpoint: EMA state requested but absent");
        for (size_t i = 0; i < params.entries().size(); ++i)
            read_into("__ema__" + params.entries()[i].first, ema->shadows()[i]);
    }
    return info;
}

}  // namespace vstain
