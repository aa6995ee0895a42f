#include "vstain/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

using nlohmann::ordered_json;

namespace vstain {

namespace {

std::string codec_kind_name(CodecKind k) {
    return k == CodecKind::fixed_orthogonal ? "fixed_orthogonal" : "toy_autoencoder";
}

CodecKind codec_kind_from(const std::string& s) {
    if (s == "fixed_orthogonal") return CodecKind::fixed_orthogonal;
    if (s == "toy_autoencoder") return CodecKind::toy_autoencoder;
    throw std::invalid_argument("config: unknown codec kind '" + s + "'");
}

// Applies the keys present in j to the known slots; rejects anything else.
class Section {
public:
    Section(const ordered_json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j.is_object()) throw std::invalid_argument("config: " + name_ + " must be an object");
        for (const auto& [k, v] : j.items()) pending_.insert(k);
    }
    template <class T>
    void get(const char* key, T& slot) {
        if (auto it = j_.find(key); it != j_.end()) {
            try {
                slot = it->get<T>();
            } catch (const nlohmann::json::exception&) {
                throw std::invalid_argument("config: bad value type for " + name_ + "." + key);
            }
            pending_.erase(key);
        }
    }
    void done() const {
        if (!pending_.empty())
            throw std::invalid_argument("config: unknown key " + name_ + "." + *pending_.begin());
    }

private:
    const ordered_json& j_;
    std::string name_;
    std::set<std::string> pending_;
};

}  // namespace

void RunConfig::validate() const {
    model.validate();
    guidance.validate();
    if (codec.compression_factor != 2 && codec.compression_factor != 4 &&
        codec.compression_factor != 8)
        throw std::invalid_argument("config: codec.compression_factor must be 2, 4 or 8");
    if (codec.latent_channels < 1) throw std::invalid_argument("config: latent_channels < 1");
    if (model.latent_channels != codec.latent_channels)
        throw std::invalid_argument("config: model/codec latent_channels disagree");
    if (schedule.T < 1) throw std::invalid_argument("config: schedule.T < 1");
    if (!(schedule.beta_start > 0.0) || !(schedule.beta_end > schedule.beta_start) ||
        schedule.beta_end >= 1.0)
        throw std::invalid_argument("config: need 0 < beta_start < beta_end < 1");
    if (loss.lambda_mse < 0.0 || loss.lambda_l1 < 0.0 || loss.lambda_mse + loss.lambda_l1 <= 0.0)
        throw std::invalid_argument("config: loss weights must be nonnegative, not both zero");
    if (cond_drop_p < 0.0 || cond_drop_p >= 1.0)
        throw std::invalid_argument("config: cond_drop_p outside [0,1)");
    if (data.image_size % codec.compression_factor != 0)
        throw std::invalid_argument("config: image_size not divisible by compression factor");
    const int lat = data.image_size / codec.compression_factor;
    if (lat % model.patch_size != 0)
        throw std::invalid_argument("config: latent size not divisible by patch size");
    if (opt.lr <= 0.0 || opt.batch_size < 1 || opt.steps < 0)
        throw std::invalid_argument("config: bad optimizer section");
    if (opt.ema_decay < 0.0 || opt.ema_decay >= 1.0)
        throw std::invalid_argument("config: ema_decay outside [0,1)");
}

std::string RunConfig::normalized() const {
    ordered_json j;
    j["model"] = {{"patch_size", model.patch_size},
                  {"hidden_dim", model.hidden_dim},
                  {"depth", model.depth},
                  {"num_heads", model.num_heads},
                  {"d_sem", model.d_sem},
                  {"mode", to_string(model.mode)},
                  {"cross_attn_every_block", model.cross_attn_every_block}};
    j["codec"] = {{"kind", codec_kind_name(codec.kind)},
                  {"compression_factor", codec.compression_factor},
                  {"latent_channels", codec.latent_channels}};
    j["schedule"] = {{"T", schedule.T},
                     {"beta_start", schedule.beta_start},
                     {"beta_end", schedule.beta_end}};
    j["loss"] = {{"lambda_mse", loss.lambda_mse}, {"lambda_l1", loss.lambda_l1}};
    j["guidance"] = {{"scale", guidance.scale},
                     {"steps", guidance.steps},
                     {"cond_drop_p", cond_drop_p}};
    j["data"] = {{"he_dir", data.he_dir},
                 {"ihc_dir", data.ihc_dir},
                 {"image_size", data.image_size}};
    j["optimizer"] = {{"lr", opt.lr},
                      {"batch_size", opt.batch_size},
                      {"steps", opt.steps},
                      {"seed", opt.seed},
                      {"weight_decay", opt.weight_decay},
                      {"ema_decay", opt.ema_decay},
                      {"checkpoint_every", opt.checkpoint_every},
                      {"codec_fit_steps", opt.codec_fit_steps}};
    return j.dump(2) + "\n";
}

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= uint64_t(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string RunConfig::fingerprint() const {
    // Only the fields that determine what the trained parameters mean enter
    // the fingerprint: architecture, codec, schedule, and the seed (which
    // derives the frozen semantic encoder). Loss weights, guidance knobs,
    // data paths and optimizer settings may differ between training and
    // inference without invalidating a checkpoint.
    ordered_json full = ordered_json::parse(normalized());
    ordered_json j;
    j["model"] = full["model"];
    j["codec"] = full["codec"];
    j["schedule"] = full["schedule"];
    j["seed"] = full["optimizer"]["seed"];
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(j.dump());
    return os.str();
}

RunConfig config_from_json_text(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("config: parse error: ") + e.what());
    }
    RunConfig c;
    if (j.contains("model")) {
        Section s(j["model"], "model");
        s.get("patch_size", c.model.patch_size);
        s.get("hidden_dim", c.model.hidden_dim);
        s.get("depth", c.model.depth);
        s.get("num_heads", c.model.num_heads);
        s.get("d_sem", c.model.d_sem);
        std::string mode = to_string(c.model.mode);
        s.get("mode", mode);
        c.model.mode = conditioning_mode_from_string(mode);
        s.get("cross_attn_every_block", c.model.cross_attn_every_block);
        s.done();
    }
    if (j.contains("codec")) {
        Section s(j["codec"], "codec");
        std::string kind = codec_kind_name(c.codec.kind);
        s.get("kind", kind);
        c.codec.kind = codec_kind_from(kind);
        s.get("compression_factor", c.codec.compression_factor);
        s.get("latent_channels", c.codec.latent_channels);
        s.done();
    }
    if (j.contains("schedule")) {
        Section s(j["schedule"], "schedule");
        s.get("T", c.schedule.T);
        s.get("beta_start", c.schedule.beta_start);
        s.get("beta_end", c.schedule.beta_end);
        s.done();
    }
    if (j.contains("loss")) {
        Section s(j["loss"], "loss");
        s.get("lambda_mse", c.loss.lambda_mse);
        s.get("lambda_l1", c.loss.lambda_l1);
        s.done();
    }
    if (j.contains("guidance")) {
        Section s(j["guidance"], "guidance");
        s.get("scale", c.guidance.scale);
        s.get("steps", c.guidance.steps);
        s.get("cond_drop_p", c.cond_drop_p);
        s.done();
    }
    if (j.contains("data")) {
        Section s(j["data"], "data");
        s.get("he_dir", c.data.he_dir);
        s.get("ihc_dir", c.data.ihc_dir);
        s.get("image_size", c.data.image_size);
        s.done();
    }
    if (j.contains("optimizer")) {
        Section s(j["optimizer"], "optimizer");
        s.get("lr", c.opt.lr);
        s.get("batch_size", c.opt.batch_size);
        s.get("steps", c.opt.steps);
        s.get("seed", c.opt.seed);
        s.get("weight_decay", c.opt.weight_decay);
        s.get("ema_decay", c.opt.ema_decay);
        s.get("checkpoint_every", c.opt.checkpoint_every);
        s.get("codec_fit_steps", c.opt.codec_fit_steps);
        s.done();
    }
    {
        const std::set<std::string> known = {"model", "codec", "schedule",  "loss",
                                             "guidance", "data", "optimizer"};
        for (const auto& [k, v] : j.items())
            if (!known.count(k)) throw std::invalid_argument("config: unknown key " + k);
    }
    c.model.latent_channels = c.codec.latent_channels;
    c.validate();
    return c;
}

RunConfig config_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return config_from_json_text(ss.str());
}

std::string resolve_data_path(const std::string& path) {
    if (path.empty()) return path;
    const char* root = std::getenv("VSTAIN_DATA_ROOT");
    if (root == nullptr || path.front() == '/') return path;
    return (std::filesystem::path(root) / path).string();
}

}  // namespace vstain
