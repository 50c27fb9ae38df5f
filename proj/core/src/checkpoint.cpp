#include "timeemb/checkpoint.hpp"

#include "timeemb/error.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace timeemb {

namespace {

using nlohmann::json;

json array_to_json(const RealArray& a) {
    return json{{"shape", a.shape()}, {"data", a.storage()}};
}

RealArray array_from_json(const json& j) {
    return RealArray(j.at("shape").get<Shape>(), j.at("data").get<std::vector<double>>());
}

json config_to_json(const ModelConfig& c) {
    json banks = json::array();
    for (const auto& b : c.banks) banks.push_back({{"slots", b.slots}, {"period", b.period}});
    json j{{"lookback", c.lookback},
           {"horizon", c.horizon},
           {"channels", c.channels},
           {"hidden", c.hidden},
           {"banks", banks},
           {"embedding_mode", to_string(c.embedding_mode)},
           {"mean_scope", to_string(c.mean_scope)},
           {"filter_enabled", c.filter_enabled},
           {"revin_enabled", c.revin_enabled},
           {"backbone", to_string(c.backbone)},
           {"revin_eps", c.revin_eps}};
    j["topk"] = c.topk_mask ? json(*c.topk_mask) : json(nullptr);
    j["lowpass"] = c.lowpass_ratio ? json(*c.lowpass_ratio) : json(nullptr);
    return j;
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.lookback = j.at("lookback").get<std::size_t>();
    c.horizon = j.at("horizon").get<std::size_t>();
    c.channels = j.at("channels").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.banks.clear();
    for (const auto& b : j.at("banks")) c.banks.push_back({b.at("slots").get<std::size_t>(), b.at("period").get<std::size_t>()});
    c.embedding_mode = parse_embedding_mode(j.at("embedding_mode").get<std::string>());
    c.mean_scope = parse_mean_scope(j.at("mean_scope").get<std::string>());
    c.filter_enabled = j.at("filter_enabled").get<bool>();
    c.revin_enabled = j.at("revin_enabled").get<bool>();
    c.backbone = parse_backbone(j.at("backbone").get<std::string>());
    c.revin_eps = j.at("revin_eps").get<double>();
    if (!j.at("topk").is_null()) c.topk_mask = j.at("topk").get<std::size_t>();
    if (!j.at("lowpass").is_null()) c.lowpass_ratio = j.at("lowpass").get<double>();
    return c;
}

} // namespace

std::string serialize_checkpoint(const TimeEmbModel& model) {
    json params = json::object();
    for (const Parameter* p : model.all_parameters()) params[p->name] = array_to_json(p->value);
    json j{{"format", "timeemb-checkpoint"},
           {"version", kCheckpointVersion},
           {"config", config_to_json(model.config())},
           {"parameters", params}};
    if (!model.fixed_invariant.empty()) j["fixed_invariant"] = array_to_json(model.fixed_invariant);
    return j.dump(1);
}

TimeEmbModel deserialize_checkpoint(const std::string& text) {
    try {
        const json j = json::parse(text);
        if (j.value("format", "") != "timeemb-checkpoint") throw FormatError("checkpoint: unknown format tag");
        const int version = j.at("version").get<int>();
        if (version != kCheckpointVersion) {
            throw FormatError("checkpoint: unsupported version " + std::to_string(version));
        }
        TimeEmbModel model = TimeEmbModel::create(config_from_json(j.at("config")), 0);
        const json& params = j.at("parameters");
        auto restore = [&](Parameter& p) {
            RealArray v = array_from_json(params.at(p.name));
            if (v.shape() != p.value.shape()) {
                throw FormatError("checkpoint: parameter " + p.name + " has shape " + shape_string(v.shape()) +
                                  ", expected " + shape_string(p.value.shape()));
            }
            p.value = std::move(v);
            p.grad = RealArray(p.value.shape());
        };
        for (auto& b : model.banks) restore(b.values);
        restore(model.filter.re);
        restore(model.filter.im);
        for (auto& p : model.backbone.params) restore(p);
        if (j.contains("fixed_invariant")) model.fixed_invariant = array_from_json(j.at("fixed_invariant"));
        return model;
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const TimeEmbModel& model) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out << serialize_checkpoint(model) << '\n';
}

TimeEmbModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_checkpoint(buf.str());
}

} // namespace timeemb
