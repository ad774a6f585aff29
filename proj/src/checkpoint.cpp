#include "narex/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace narex {

namespace {

constexpr char kMagic[8] = {'N', 'R', 'X', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeF64 = 0;

class Writer {
  public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        NAREX_CHECK(out_.good(), "cannot open ", path, " for writing");
    }
    void bytes(const void* p, std::size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    }
    template <typename T>
    void pod(T v) {
        bytes(&v, sizeof(T));
    }
    void str(const std::string& s) {
        pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    void finish(const std::string& path) {
        out_.flush();
        NAREX_CHECK(out_.good(), "failed writing checkpoint to ", path);
    }

  private:
    std::ofstream out_;
};

class Reader {
  public:
    explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        NAREX_CHECK(in_.good(), "cannot open checkpoint file ", path);
    }
    std::size_t offset() const { return offset_; }
    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        NAREX_CHECK(static_cast<std::size_t>(in_.gcount()) == n, path_,
                    ": truncated checkpoint, needed ", n, " bytes at offset ",
                    offset_);
        offset_ += n;
    }
    template <typename T>
    T pod() {
        T v;
        bytes(&v, sizeof(T));
        return v;
    }
    std::string str() {
        const auto n = pod<std::uint32_t>();
        NAREX_CHECK(n < (1u << 20), path_, ": implausible string length ", n,
                    " at offset ", offset_ - sizeof(std::uint32_t));
        std::string s(n, '\0');
        if (n) bytes(s.data(), n);
        return s;
    }
    void expect_end() {
        char c;
        in_.read(&c, 1);
        NAREX_CHECK(in_.eof(), path_, ": trailing bytes at offset ", offset_);
    }

  private:
    std::string path_;
    std::ifstream in_;
    std::size_t offset_ = 0;
};

void write_kv_i64(Writer& w, const std::string& key, std::int64_t v) {
    w.pod<std::uint8_t>(0);
    w.str(key);
    w.pod<std::int64_t>(v);
}

void write_kv_f64(Writer& w, const std::string& key, double v) {
    w.pod<std::uint8_t>(1);
    w.str(key);
    w.pod<double>(v);
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
    Writer w(path);
    w.bytes(kMagic, sizeof(kMagic));
    w.pod<std::uint32_t>(kVersion);

    const ModelConfig& cfg = model.config();
    w.pod<std::uint32_t>(8);  // config entry count
    write_kv_i64(w, "L", cfg.L);
    write_kv_i64(w, "d", cfg.d);
    write_kv_i64(w, "heads", cfg.heads);
    write_kv_i64(w, "d_ff", cfg.d_ff);
    write_kv_i64(w, "T_max", cfg.T_max);
    write_kv_i64(w, "V", cfg.V);
    write_kv_i64(w, "share_off_ramps", cfg.share_off_ramps ? 1 : 0);
    write_kv_f64(w, "dropout", cfg.dropout);

    const auto params = model.named_params();
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        w.str(name);
        w.pod<std::uint8_t>(kDtypeF64);
        w.pod<std::uint32_t>(static_cast<std::uint32_t>(t.shape().size()));
        for (int dim : t.shape()) w.pod<std::int32_t>(dim);
        w.bytes(t.values().data(), t.numel() * sizeof(real_t));
    }
    w.finish(path);
}

Model load_checkpoint(const std::string& path) {
    Reader r(path);
    char magic[8];
    r.bytes(magic, sizeof(magic));
    NAREX_CHECK(std::memcmp(magic, kMagic, sizeof(kMagic)) == 0, path,
                ": bad magic at offset 0, not a checkpoint file");
    const auto version = r.pod<std::uint32_t>();
    NAREX_CHECK(version == kVersion, path, ": format version ", version,
                " unsupported, expected ", kVersion);

    ModelConfig cfg;
    const auto entries = r.pod<std::uint32_t>();
    for (std::uint32_t i = 0; i < entries; ++i) {
        const auto type = r.pod<std::uint8_t>();
        const std::string key = r.str();
        if (type == 0) {
            const auto v = r.pod<std::int64_t>();
            if (key == "L") cfg.L = static_cast<int>(v);
            else if (key == "d") cfg.d = static_cast<int>(v);
            else if (key == "heads") cfg.heads = static_cast<int>(v);
            else if (key == "d_ff") cfg.d_ff = static_cast<int>(v);
            else if (key == "T_max") cfg.T_max = static_cast<int>(v);
            else if (key == "V") cfg.V = static_cast<int>(v);
            else if (key == "share_off_ramps") cfg.share_off_ramps = v != 0;
            else fail(path, ": unknown config key \"", key, "\"");
        } else if (type == 1) {
            const double v = r.pod<double>();
            if (key == "dropout") cfg.dropout = v;
            else fail(path, ": unknown config key \"", key, "\"");
        } else {
            fail(path, ": unknown config entry type ", static_cast<int>(type),
                 " at offset ", r.offset());
        }
    }
    cfg.validate();

    Rng scratch(0);
    Model model(cfg, scratch);
    auto params = model.named_params();
    const auto count = r.pod<std::uint32_t>();
    NAREX_CHECK(count == params.size(), path, ": checkpoint holds ", count,
                " parameters, model defines ", params.size());
    for (auto& [name, t] : params) {
        const std::size_t name_offset = r.offset();
        const std::string stored = r.str();
        NAREX_CHECK(stored == name, path, ": parameter \"", stored,
                    "\" at offset ", name_offset, ", expected \"", name, "\"");
        const auto dtype = r.pod<std::uint8_t>();
        NAREX_CHECK(dtype == kDtypeF64, path, ": parameter \"", name,
                    "\" has unsupported dtype ", static_cast<int>(dtype));
        const auto ndim = r.pod<std::uint32_t>();
        NAREX_CHECK(ndim == t.shape().size(), path, ": parameter \"", name,
                    "\" rank ", ndim, ", expected ", t.shape().size());
        for (int dim : t.shape()) {
            const auto stored_dim = r.pod<std::int32_t>();
            NAREX_CHECK(stored_dim == dim, path, ": parameter \"", name,
                        "\" dimension ", stored_dim, ", expected ", dim);
        }
        r.bytes(t.values().data(), t.numel() * sizeof(real_t));
    }
    r.expect_end();
    return model;
}

}  // namespace narex
