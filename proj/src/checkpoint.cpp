#include "cegzsl/binary_io.hpp"
#include "cegzsl/trainer.hpp"

namespace cegzsl {

namespace {

constexpr std::string_view kMagic = "CEGZ";
constexpr std::uint32_t kVersion = 1;

void write_net(binary::Writer& w, const Mlp<float>& net) {
  w.u32(static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& l : net.layers()) {
    w.u32(static_cast<std::uint32_t>(l.kind));
    w.u32(static_cast<std::uint32_t>(l.in_dim));
    w.u32(static_cast<std::uint32_t>(l.out_dim));
    w.u64(std::bit_cast<std::uint64_t>(l.slope));
  }
  for (const auto& p : net.params()) {
    w.u64(p.step_count);
    w.matrix(p.value);
    w.matrix(p.moment1);
    w.matrix(p.moment2);
  }
}

Mlp<float> read_net(binary::Reader& r) {
  const auto n_layers = r.u32();
  if (n_layers == 0) return {};
  std::vector<LayerSpec> layers(n_layers);
  for (auto& l : layers) {
    const auto kind = r.u32();
    if (kind > static_cast<std::uint32_t>(LayerKind::l2_normalize_rows)) {
      throw IoError("checkpoint names an unknown layer kind");
    }
    l.kind = static_cast<LayerKind>(kind);
    l.in_dim = r.u32();
    l.out_dim = r.u32();
    l.slope = std::bit_cast<double>(r.u64());
  }
  Mlp<float> net(std::move(layers));
  for (auto& p : net.params()) {
    p.step_count = r.u64();
    Mat value = r.matrix();
    Mat m1 = r.matrix();
    Mat m2 = r.matrix();
    if (!value.same_shape(p.value) || !m1.same_shape(p.value) || !m2.same_shape(p.value)) {
      throw ShapeError("checkpoint parameter shape does not match its layer");
    }
    p.value = std::move(value);
    p.moment1 = std::move(m1);
    p.moment2 = std::move(m2);
  }
  return net;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  binary::Writer w;
  w.magic(kMagic);
  w.u32(kVersion);
  const std::string cfg = config_json(ck.config);
  w.string(cfg);
  w.u64(binary::fnv1a(cfg));
  w.u64(ck.config.seed);
  w.u64(ck.state.step);
  w.u64(ck.state.rng_counter);
  const NetBundle& b = ck.bundle;
  w.u32(static_cast<std::uint32_t>(b.mode));
  for (std::size_t v : {b.feature_dim, b.attr_dim, b.seen, b.unseen}) w.u32(static_cast<std::uint32_t>(v));
  w.u32(static_cast<std::uint32_t>(b.nets.g.noise_dim));
  w.u32(static_cast<std::uint32_t>(b.nets.g.attr_dim));
  write_net(w, b.nets.g.net);
  w.u32(static_cast<std::uint32_t>(b.nets.d.feature_dim));
  w.u32(static_cast<std::uint32_t>(b.nets.d.attr_dim));
  write_net(w, b.nets.d.net);
  write_net(w, b.nets.e);
  write_net(w, b.nets.h);
  w.u32(static_cast<std::uint32_t>(b.nets.f.embed_dim));
  w.u32(static_cast<std::uint32_t>(b.nets.f.attr_dim));
  write_net(w, b.nets.f.net);
  w.u32(static_cast<std::uint32_t>(b.feature_lo.size()));
  w.floats(b.feature_lo);
  w.floats(b.feature_inv_range);
  w.u8(ck.classifier ? 1 : 0);
  if (ck.classifier) {
    w.u32(static_cast<std::uint32_t>(ck.classifier->space));
    write_net(w, ck.classifier->linear);
  }
  w.u64(binary::fnv1a(std::span<const std::uint8_t>(w.buffer())));
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagic.size() ||
      std::string_view(reinterpret_cast<const char*>(bytes.data()), kMagic.size()) != kMagic) {
    throw MagicMismatch("not a checkpoint file (bad magic)");
  }
  if (bytes.size() < kMagic.size() + 8) throw IoError("truncated checkpoint");
  const auto body = bytes.first(bytes.size() - 8);
  binary::Reader tail(bytes.last(8));
  if (tail.u64() != binary::fnv1a(body)) throw HashMismatch("checkpoint payload hash mismatch");

  binary::Reader r(body);
  r.magic(kMagic.size());
  if (const auto v = r.u32(); v != kVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(v));
  }
  Checkpoint ck;
  const std::string cfg = r.string();
  if (r.u64() != binary::fnv1a(cfg)) throw HashMismatch("checkpoint config hash mismatch");
  try {
    ck.config = nlohmann::json::parse(cfg).get<TrainConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint config: ") + e.what());
  }
  if (r.u64() != ck.config.seed) throw HashMismatch("checkpoint seed differs from its config");
  ck.state.step = r.u64();
  ck.state.rng_counter = r.u64();
  NetBundle& b = ck.bundle;
  const auto mode = r.u32();
  if (mode > static_cast<std::uint32_t>(Mode::ce_full)) throw IoError("checkpoint names an unknown mode");
  b.mode = static_cast<Mode>(mode);
  b.feature_dim = r.u32();
  b.attr_dim = r.u32();
  b.seen = r.u32();
  b.unseen = r.u32();
  b.nets.g.noise_dim = r.u32();
  b.nets.g.attr_dim = r.u32();
  b.nets.g.net = read_net(r);
  b.nets.d.feature_dim = r.u32();
  b.nets.d.attr_dim = r.u32();
  b.nets.d.net = read_net(r);
  b.nets.e = read_net(r);
  b.nets.h = read_net(r);
  b.nets.f.embed_dim = r.u32();
  b.nets.f.attr_dim = r.u32();
  b.nets.f.net = read_net(r);
  if (const std::size_t n = r.u32(); n > 0) {
    if (n != b.feature_dim) throw IoError("checkpoint feature scaling has the wrong width");
    const Mat lo = r.floats(1, n), inv = r.floats(1, n);
    b.feature_lo.assign(lo.values().begin(), lo.values().end());
    b.feature_inv_range.assign(inv.values().begin(), inv.values().end());
  }
  if (r.u8() != 0) {
    SoftmaxClassifier clf;
    const auto space = r.u32();
    if (space > 1) throw IoError("checkpoint names an unknown classifier space");
    clf.space = static_cast<ClassifierSpace>(space);
    clf.linear = read_net(r);
    ck.classifier = std::move(clf);
  }
  if (r.remaining() != 0) throw IoError("trailing bytes after checkpoint payload");
  return ck;
}

void checkpoint_save(const Checkpoint& ck, const std::string& path) {
  const auto bytes = encode_checkpoint(ck);
  binary::write_file_atomic(path, bytes);
}

Checkpoint checkpoint_load(const std::string& path) {
  const auto bytes = binary::read_file(path);
  return decode_checkpoint(bytes);
}

Checkpoint checkpoint_load(const std::string& path, const TrainConfig& expected) {
  Checkpoint ck = checkpoint_load(path);
  if (config_hash(ck.config) != config_hash(expected)) {
    throw HashMismatch("checkpoint was written under a different config");
  }
  return ck;
}

}  // namespace cegzsl
