#include "atlas/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <json.hpp>

#include "atlas/io.hpp"

namespace atlas {

namespace {

constexpr std::string_view kMagic = "SUSCEPTATLASCKPT";
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  Reader(std::string_view data, const std::string& path) : data_(data), path_(path) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(byte()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(byte()) << (8 * i);
    return v;
  }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  unsigned char byte() { return static_cast<unsigned char>(data_[pos_++]); }
  void need(std::size_t n) {
    if (pos_ + n > data_.size()) {
      throw ChecksumError("checkpoint truncated: " + path_);
    }
  }
  std::string_view data_;
  std::size_t pos_ = 0;
  const std::string path_;
};

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"n_layers", c.n_layers},       {"heads_per_layer", c.heads_per_layer},
          {"d_model", c.d_model},         {"d_head", c.d_head},
          {"vocab_size", c.vocab_size},   {"max_context", c.max_context},
          {"layernorm", c.layernorm},     {"positional", c.positional}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.n_layers = j.at("n_layers").get<int>();
  c.heads_per_layer = j.at("heads_per_layer").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.d_head = j.at("d_head").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.max_context = j.at("max_context").get<int>();
  c.layernorm = j.at("layernorm").get<bool>();
  c.positional = j.at("positional").get<std::string>();
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::string out;
  out += kMagic;
  put_u32(out, kVersion);

  nlohmann::json meta = {{"model", config_to_json(ckpt.config)}, {"step", ckpt.step}};
  const std::string meta_str = meta.dump();
  put_u64(out, meta_str.size());
  out += meta_str;

  const auto& segs = ckpt.params.segments();
  put_u64(out, segs.size());
  for (const auto& seg : segs) {
    put_u32(out, static_cast<std::uint32_t>(seg.name.size()));
    out += seg.name;
    put_u64(out, seg.offset);
    put_u64(out, seg.size);
  }

  put_u64(out, ckpt.params.size());
  for (const double v : ckpt.params.values()) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }

  put_u32(out, crc32(out));
  write_file(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  if (data.size() < kMagic.size() + 8) throw ChecksumError("checkpoint truncated: " + path.string());

  const std::string_view body(data.data(), data.size() - 4);
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) {
    stored |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[data.size() - 4 + i]))
              << (8 * i);
  }
  if (crc32(body) != stored) {
    throw ChecksumError("checkpoint checksum mismatch: " + path.string());
  }

  Reader r(body, path.string());
  if (r.bytes(kMagic.size()) != kMagic) {
    throw std::runtime_error("not a checkpoint file: " + path.string());
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw VersionError("unsupported checkpoint version " + std::to_string(version) + " in " +
                       path.string());
  }

  const std::size_t meta_len = r.u64();
  const nlohmann::json meta = nlohmann::json::parse(r.bytes(meta_len));
  Checkpoint ckpt;
  ckpt.config = config_from_json(meta.at("model"));
  ckpt.config.validate();
  ckpt.step = meta.at("step").get<long long>();

  const std::size_t n_segs = r.u64();
  auto segs = std::make_shared<std::vector<Segment>>();
  segs->reserve(n_segs);
  for (std::size_t i = 0; i < n_segs; ++i) {
    Segment seg;
    const std::uint32_t name_len = r.u32();
    seg.name = std::string(r.bytes(name_len));
    seg.offset = r.u64();
    seg.size = r.u64();
    segs->push_back(std::move(seg));
  }

  const std::size_t n_params = r.u64();
  std::vector<double> values(n_params);
  for (std::size_t i = 0; i < n_params; ++i) {
    const std::uint32_t bits = r.u32();
    float f;
    std::memcpy(&f, &bits, 4);
    values[i] = static_cast<double>(f);
    if (!std::isfinite(values[i])) {
      throw std::runtime_error("checkpoint contains non-finite parameter: " + path.string());
    }
  }
  if (r.pos() != body.size()) {
    throw std::runtime_error("checkpoint has trailing bytes: " + path.string());
  }
  ckpt.params = ParamVector(std::move(segs), std::move(values));
  return ckpt;
}

}  // namespace atlas
