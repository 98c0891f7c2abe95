#include "modeshare/config.hpp"

#include "modeshare/error.hpp"
#include "modeshare/io.hpp"
#include "modeshare/sampler.hpp"

#include <cctype>
#include <functional>
#include <set>

namespace modeshare::config {
namespace {

bool is_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
}

bool valid_key(std::string_view k) {
    if (k.empty() || k.front() == '.' || k.back() == '.' || k.find("..") != std::string_view::npos) {
        return false;
    }
    for (char c : k) {
        if (!is_key_char(c)) {
            return false;
        }
    }
    return true;
}

std::string line_tag(std::string_view source, std::size_t line) {
    return std::string(source) + ":" + std::to_string(line);
}

// Strip a trailing comment, honouring quoted strings.
std::string_view strip_comment(std::string_view line) {
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_str && c == '\\') {
            ++i;
        } else if (c == '"') {
            in_str = !in_str;
        } else if (c == '#' && !in_str) {
            return line.substr(0, i);
        }
    }
    return line;
}

RawValue parse_value(std::string_view v, const std::string& key, const std::string& origin) {
    RawValue out;
    out.origin = origin;
    if (v.empty()) {
        throw ConfigError(key, "missing value (" + origin + ")");
    }
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"') {
            throw ConfigError(key, "unterminated string (" + origin + ")");
        }
        std::string s;
        for (std::size_t i = 1; i + 1 < v.size(); ++i) {
            char c = v[i];
            if (c == '\\') {
                if (i + 2 >= v.size()) {
                    throw ConfigError(key, "dangling escape (" + origin + ")");
                }
                const char e = v[++i];
                switch (e) {
                    case 'n': c = '\n'; break;
                    case 't': c = '\t'; break;
                    case '"': c = '"'; break;
                    case '\\': c = '\\'; break;
                    default: throw ConfigError(key, std::string("unsupported escape \\") + e + " (" + origin + ")");
                }
            } else if (c == '"') {
                throw ConfigError(key, "unexpected quote inside string (" + origin + ")");
            }
            s += c;
        }
        out.text = std::move(s);
        out.quoted = true;
        return out;
    }
    if (v.front() == '[' || v.front() == '{' || v.front() == '\'') {
        throw ConfigError(key, "arrays, inline tables and literal strings are not supported (" + origin + ")");
    }
    out.text = std::string(v);
    return out;
}

class Reader {
public:
    Reader(const RawConfig& raw, std::filesystem::path base) : raw_(raw), base_(std::move(base)) {}

    const RawValue* get(const std::string& key) {
        used_.insert(key);
        auto it = raw_.find(key);
        return it == raw_.end() ? nullptr : &it->second;
    }

    void string(const std::string& key, std::function<void(const std::string&)> set) {
        if (const RawValue* v = get(key)) {
            set(v->text);
        }
    }

    std::optional<double> number(const std::string& key) {
        const RawValue* v = get(key);
        if (!v) {
            return std::nullopt;
        }
        const auto d = v->quoted ? std::nullopt : io::parse_double(v->text);
        if (!d) {
            throw ConfigError(key, "expected a number, got '" + v->text + "' (" + v->origin + ")");
        }
        return d;
    }

    std::optional<long long> integer(const std::string& key) {
        const RawValue* v = get(key);
        if (!v) {
            return std::nullopt;
        }
        const auto d = v->quoted ? std::nullopt : io::parse_int(v->text);
        if (!d) {
            throw ConfigError(key, "expected an integer, got '" + v->text + "' (" + v->origin + ")");
        }
        return d;
    }

    std::optional<bool> boolean(const std::string& key) {
        const RawValue* v = get(key);
        if (!v) {
            return std::nullopt;
        }
        if (!v->quoted && v->text == "true") {
            return true;
        }
        if (!v->quoted && v->text == "false") {
            return false;
        }
        throw ConfigError(key, "expected true or false, got '" + v->text + "' (" + v->origin + ")");
    }

    std::optional<std::filesystem::path> path(const std::string& key, bool must_exist) {
        const RawValue* v = get(key);
        if (!v) {
            return std::nullopt;
        }
        if (v->text.empty()) {
            throw ConfigError(key, "empty path (" + v->origin + ")");
        }
        std::filesystem::path p(v->text);
        if (p.is_relative()) {
            p = base_ / p;
        }
        p = p.lexically_normal();
        if (must_exist && !std::filesystem::exists(p)) {
            throw ConfigError(key, "path does not exist: " + p.string());
        }
        return p;
    }

    void reject_unknown(const std::string& dynamic_prefix) const {
        for (const auto& [key, v] : raw_) {
            if (!used_.count(key) && key.rfind(dynamic_prefix, 0) != 0) {
                throw ConfigError(key, "unknown setting (" + v.origin + ")");
            }
        }
    }

private:
    const RawConfig& raw_;
    std::filesystem::path base_;
    std::set<std::string> used_;
};

void require_unit(const std::string& key, double v) {
    if (!(v >= 0.0 && v <= 1.0)) {
        throw ConfigError(key, "must lie in [0,1], got " + io::format_double(v));
    }
}

}  // namespace

RawConfig parse_toml(std::string_view text, std::string_view source) {
    RawConfig out;
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (line_no == 1 && line.substr(0, 3) == "\xEF\xBB\xBF") {
            line.remove_prefix(3);
        }
        line = io::trim(strip_comment(line));
        if (line.empty()) {
            continue;
        }
        const std::string origin = line_tag(source, line_no);
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3 || line[1] == '[') {
                throw ConfigError("line " + std::to_string(line_no), "malformed section header (" + origin + ")");
            }
            const std::string_view name = io::trim(line.substr(1, line.size() - 2));
            if (!valid_key(name)) {
                throw ConfigError("line " + std::to_string(line_no), "invalid section name (" + origin + ")");
            }
            section = std::string(name);
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("line " + std::to_string(line_no), "expected key = value (" + origin + ")");
        }
        const std::string_view k = io::trim(line.substr(0, eq));
        if (!valid_key(k)) {
            throw ConfigError("line " + std::to_string(line_no), "invalid key '" + std::string(k) + "' (" + origin + ")");
        }
        const std::string key = section.empty() ? std::string(k) : section + "." + std::string(k);
        if (out.count(key)) {
            throw ConfigError(key, "defined twice (" + origin + ")");
        }
        out[key] = parse_value(io::trim(line.substr(eq + 1)), key, origin);
    }
    return out;
}

void apply_override(RawConfig& raw, std::string_view dotted_key, std::string_view value) {
    if (!valid_key(dotted_key)) {
        throw ConfigError(std::string(dotted_key), "invalid override key");
    }
    RawValue v;
    v.text = std::string(value);
    v.origin = "command line";
    raw[std::string(dotted_key)] = std::move(v);
}

std::string_view to_string(Mode m) { return m == Mode::cycle ? "cycle" : "motorcycle"; }

std::string_view to_string(MetadataSource s) {
    switch (s) {
        case MetadataSource::none: return "none";
        case MetadataSource::fixture: return "fixture";
        case MetadataSource::live: return "live";
    }
    return "none";
}

PipelineConfig build_config(const RawConfig& raw, const std::filesystem::path& base_dir) {
    PipelineConfig c;
    c.base_dir = base_dir;
    Reader r(raw, base_dir);

    auto& p = c.paths;
    p.city_table = r.path("paths.city_table", true);
    p.boundaries = r.path("paths.boundaries", true);
    p.population = r.path("paths.population", true);
    p.roads = r.path("paths.roads", true);
    p.detections = r.path("paths.detections", true);
    p.metadata = r.path("paths.metadata", true);
    p.ground_truth = r.path("paths.ground_truth", true);
    p.labelled_detections = r.path("paths.labelled_detections", true);
    p.manual_counts = r.path("paths.manual_counts", true);
    p.counts = r.path("paths.counts", true);
    p.model = r.path("paths.model", true);

    if (auto v = r.number("sampling.spacing_m")) {
        if (!(*v >= sampler::kMinSpacingM && *v <= sampler::kMaxSpacingM)) {
            throw ConfigError("sampling.spacing_m", "must lie in [20,100], got " + io::format_double(*v));
        }
        c.sampling.spacing_m = *v;
    }
    if (auto v = r.integer("sampling.max_points")) {
        if (*v <= 0) {
            throw ConfigError("sampling.max_points", "must be positive");
        }
        c.sampling.max_points = static_cast<std::size_t>(*v);
    }
    if (auto v = r.integer("sampling.seed")) {
        if (*v < 0) {
            throw ConfigError("sampling.seed", "must be non-negative");
        }
        c.sampling.seed = static_cast<std::uint64_t>(*v);
    }
    r.string("sampling.metadata", [&](const std::string& s) {
        if (s == "none") {
            c.sampling.metadata = MetadataSource::none;
        } else if (s == "fixture") {
            c.sampling.metadata = MetadataSource::fixture;
        } else if (s == "live") {
            c.sampling.metadata = MetadataSource::live;
        } else {
            throw ConfigError("sampling.metadata", "expected none, fixture or live, got '" + s + "'");
        }
    });
    if (c.sampling.metadata == MetadataSource::fixture && !p.metadata) {
        throw ConfigError("paths.metadata", "required when sampling.metadata = \"fixture\"");
    }

    if (auto v = r.number("thresholds.confidence")) {
        require_unit("thresholds.confidence", *v);
        c.thresholds.confidence = *v;
    }
    if (auto v = r.number("thresholds.iou")) {
        require_unit("thresholds.iou", *v);
        c.thresholds.iou = *v;
    }
    if (auto v = r.number("thresholds.residual_pp")) {
        if (!(*v >= 0.0)) {
            throw ConfigError("thresholds.residual_pp", "must be non-negative");
        }
        c.thresholds.residual_pp = *v;
    }
    if (auto v = r.integer("thresholds.saturation_step")) {
        if (*v <= 0) {
            throw ConfigError("thresholds.saturation_step", "must be positive");
        }
        c.thresholds.saturation_step = static_cast<std::size_t>(*v);
    }

    r.string("model.mode", [&](const std::string& s) {
        if (s == "cycle") {
            c.model.mode = Mode::cycle;
        } else if (s == "motorcycle") {
            c.model.mode = Mode::motorcycle;
        } else {
            throw ConfigError("model.mode", "expected cycle or motorcycle, got '" + s + "'");
        }
    });
    if (auto v = r.boolean("model.intercept")) {
        c.model.intercept = *v;
    }
    if (auto v = r.boolean("model.weighted")) {
        c.model.weighted = *v;
    }

    if (auto v = r.number("commute.default")) {
        if (!(*v > 0.0 && *v <= 1.0)) {
            throw ConfigError("commute.default", "must lie in (0,1]");
        }
        c.commute.default_factor = *v;
    }
    for (const auto& [key, value] : raw) {
        if (key.rfind("commute.", 0) == 0 && key != "commute.default") {
            const auto v = r.number(key);
            if (!(*v > 0.0 && *v <= 1.0)) {
                throw ConfigError(key, "must lie in (0,1]");
            }
            c.commute.by_country[key.substr(8)] = *v;
        }
    }

    if (auto v = r.path("run.out", false)) {
        c.run.out = *v;
    } else {
        c.run.out = (base_dir / "out").lexically_normal();
    }
    if (auto v = r.integer("run.workers")) {
        if (*v < 1) {
            throw ConfigError("run.workers", "must be at least 1");
        }
        c.run.workers = static_cast<std::size_t>(*v);
    }
    if (auto v = r.number("run.plot_min_pct")) {
        c.run.plot_min_pct = *v;
    }

    r.reject_unknown("commute.");
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path,
                           const std::vector<std::pair<std::string, std::string>>& overrides) {
    std::string text;
    try {
        text = io::read_text(path);
    } catch (const Error& e) {
        throw ConfigError("--config", e.what());
    }
    RawConfig raw = parse_toml(text, path.filename().string());
    for (const auto& [k, v] : overrides) {
        apply_override(raw, k, v);
    }
    const std::filesystem::path base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    return build_config(raw, base);
}

}  // namespace modeshare::config
