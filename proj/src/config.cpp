#include "narex/config.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <type_traits>
#include <utility>

namespace narex {

namespace {

std::string trim(const std::string& s) {
    std::size_t lo = 0, hi = s.size();
    while (lo < hi && std::isspace(static_cast<unsigned char>(s[lo]))) ++lo;
    while (hi > lo && std::isspace(static_cast<unsigned char>(s[hi - 1]))) --hi;
    return s.substr(lo, hi - lo);
}

struct RawConfig {
    // section -> key -> (value, line number)
    std::map<std::string, std::map<std::string, std::pair<std::string, int>>>
        entries;
    std::string dir;  // folder of the config file, for relative paths
};

RawConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    NAREX_CHECK(in.good(), "cannot open config file ", path);

    RawConfig raw;
    raw.dir = std::filesystem::path(path).parent_path().string();

    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            NAREX_CHECK(line.back() == ']', "config line ", line_no,
                        ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            NAREX_CHECK(!section.empty(), "config line ", line_no,
                        ": empty section name");
            continue;
        }

        const std::size_t eq = line.find('=');
        NAREX_CHECK(eq != std::string::npos, "config line ", line_no,
                    ": expected key = value");
        NAREX_CHECK(!section.empty(), "config line ", line_no,
                    ": key before any [section]");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        NAREX_CHECK(!key.empty(), "config line ", line_no, ": empty key");
        NAREX_CHECK(!value.empty(), "config line ", line_no,
                    ": empty value for key ", key);
        const auto [it, inserted] =
            raw.entries[section].emplace(key, std::make_pair(value, line_no));
        NAREX_CHECK(inserted, "config line ", line_no, ": duplicate key ", key,
                    " in [", section, "], first set on line ",
                    it->second.second);
    }
    return raw;
}

// Pulls typed values out of one section and complains about leftovers.
class SectionReader {
  public:
    SectionReader(RawConfig& raw, const std::string& name)
        : raw_(raw), name_(name) {}

    bool take(const std::string& key, std::string* out) {
        auto sec = raw_.entries.find(name_);
        if (sec == raw_.entries.end()) return false;
        auto it = sec->second.find(key);
        if (it == sec->second.end()) return false;
        *out = it->second.first;
        line_ = it->second.second;
        sec->second.erase(it);
        return true;
    }

    template <typename T>
    void number(const std::string& key, T* out) {
        std::string text;
        if (!take(key, &text)) return;
        try {
            if constexpr (std::is_floating_point_v<T>) {
                std::size_t used = 0;
                *out = static_cast<T>(std::stod(text, &used));
                NAREX_CHECK(used == text.size(), "bad number");
            } else {
                std::size_t used = 0;
                const long long v = std::stoll(text, &used);
                NAREX_CHECK(used == text.size(), "bad number");
                NAREX_CHECK(v >= 0 || std::is_signed_v<T>, "negative");
                *out = static_cast<T>(v);
            }
        } catch (const std::exception&) {
            fail("config line ", line_, ": [", name_, "] ", key, " = ", text,
                 " is not a valid number");
        }
    }

    void boolean(const std::string& key, bool* out) {
        std::string text;
        if (!take(key, &text)) return;
        if (text == "true") {
            *out = true;
        } else if (text == "false") {
            *out = false;
        } else {
            fail("config line ", line_, ": [", name_, "] ", key, " = ", text,
                 " must be true or false");
        }
    }

    void path(const std::string& key, std::string* out) {
        std::string text;
        if (!take(key, &text)) return;
        std::filesystem::path p(text);
        if (p.is_relative() && !raw_.dir.empty()) {
            p = std::filesystem::path(raw_.dir) / p;
        }
        NAREX_CHECK(std::filesystem::exists(p), "config line ", line_, ": [",
                    name_, "] ", key, " refers to missing file ", p.string());
        *out = p.string();
    }

  private:
    RawConfig& raw_;
    std::string name_;
    int line_ = 0;
};

}  // namespace

RunConfig load_run_config(const std::string& path) {
    RawConfig raw = parse_file(path);
    RunConfig cfg;

    SectionReader model(raw, "model");
    model.number("layers", &cfg.model.L);
    model.number("width", &cfg.model.d);
    model.number("heads", &cfg.model.heads);
    model.number("ffn_width", &cfg.model.d_ff);
    model.number("max_length", &cfg.model.T_max);
    model.boolean("share_off_ramps", &cfg.model.share_off_ramps);
    model.number("dropout", &cfg.model.dropout);

    SectionReader corruption(raw, "corruption");
    corruption.number("span_fraction", &cfg.corruption.span_fraction);
    corruption.number("poisson_lambda", &cfg.corruption.poisson_lambda);
    corruption.boolean("shuffle_sentences", &cfg.corruption.shuffle_sentences);

    SectionReader training(raw, "training");
    training.number("steps", &cfg.training.steps);
    training.number("lr", &cfg.training.lr);
    training.number("batch", &cfg.training.batch);
    training.number("k", &cfg.training.k);
    std::string seed_text;
    NAREX_CHECK(training.take("seed", &seed_text),
                "config: [training] seed is required");
    try {
        std::size_t used = 0;
        cfg.training.seed = std::stoull(seed_text, &used);
        NAREX_CHECK(used == seed_text.size(), "bad number");
    } catch (const std::exception&) {
        fail("config: [training] seed = ", seed_text,
             " is not a valid number");
    }

    SectionReader decoding(raw, "decoding");
    decoding.take("mode", &cfg.decoding.mode);
    decoding.number("delta", &cfg.decoding.delta);
    decoding.number("length", &cfg.decoding.length);

    SectionReader data(raw, "data");
    data.path("vocab", &cfg.data.vocab);
    data.path("corpus", &cfg.data.corpus);
    data.path("src", &cfg.data.src);
    data.path("tgt", &cfg.data.tgt);

    // Anything still present was not consumed above.
    for (const auto& [section, keys] : raw.entries) {
        static const std::set<std::string> known{"model", "corruption",
                                                "training", "decoding", "data"};
        NAREX_CHECK(known.count(section) == 1, "config line ",
                    keys.begin()->second.second, ": unknown section [", section,
                    "]");
        if (!keys.empty()) {
            fail("config line ", keys.begin()->second.second, ": unknown key ",
                 keys.begin()->first, " in [", section, "]");
        }
    }

    NAREX_CHECK(cfg.decoding.mode == "ar" || cfg.decoding.mode == "nar" ||
                    cfg.decoding.mode == "hard" || cfg.decoding.mode == "soft",
                "config: [decoding] mode must be ar, nar, hard or soft, got ",
                cfg.decoding.mode);
    NAREX_CHECK(cfg.decoding.delta >= 0.0,
                "config: [decoding] delta must be non-negative");
    NAREX_CHECK(cfg.decoding.length >= 1,
                "config: [decoding] length must be at least 1");
    NAREX_CHECK(cfg.training.steps >= 0,
                "config: [training] steps must not be negative");
    NAREX_CHECK(cfg.training.batch >= 1,
                "config: [training] batch must be at least 1");
    NAREX_CHECK(cfg.training.k >= 1,
                "config: [training] k must be at least 1");
    NAREX_CHECK(cfg.training.lr > 0.0,
                "config: [training] lr must be positive");
    cfg.corruption.validate();
    return cfg;
}

}  // namespace narex
