#include "tsnca/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <vector>

namespace tsnca {
namespace {

constexpr std::uint64_t kMaxNameLength = 4096;
constexpr std::uint64_t kMaxRank = 8;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 31;

template <typename U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    U out{};
    auto* src = reinterpret_cast<const unsigned char*>(&v);
    auto* dst = reinterpret_cast<unsigned char*>(&out);
    for (std::size_t i = 0; i < sizeof(U); ++i) dst[i] = src[sizeof(U) - 1 - i];
    return out;
  } else {
    return v;
  }
}

void put_u64(std::ostream& os, std::uint64_t v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_tensors(std::ostream& os, const NamedTensors<float>& tensors) {
  put_u64(os, tensors.size());
  for (const auto& [name, t] : tensors) {
    put_u64(os, name.size());
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(os, t.rank());
    for (const auto e : t.shape()) put_u64(os, e);
    for (const float v : t.data()) {
      std::uint32_t bits = to_little(std::bit_cast<std::uint32_t>(v));
      os.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
}

// Reader that reports what was being read when the stream ran dry.
class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  bool bytes(void* dst, std::size_t n) {
    is_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(is_.gcount()) == n;
  }

  std::optional<std::uint64_t> u64() {
    std::uint64_t v = 0;
    if (!bytes(&v, sizeof v)) return std::nullopt;
    return to_little(v);
  }

 private:
  std::istream& is_;
};

std::string describe_tensor(const std::string& section, std::uint64_t index, std::uint64_t count,
                            const std::string& name) {
  std::string d = section + " tensor #" + std::to_string(index + 1) + " of " + std::to_string(count);
  if (!name.empty()) d += " ('" + name + "')";
  return d;
}

NamedTensors<float> read_tensors(Reader& r, const std::string& section,
                                 const std::vector<std::string>& expected_names) {
  const auto count = r.u64();
  if (!count) throw CheckpointError("truncated checkpoint: missing " + section + " tensor count");
  NamedTensors<float> out;
  for (std::uint64_t i = 0; i < *count; ++i) {
    std::string name = i < expected_names.size() ? expected_names[i] : std::string();
    auto fail = [&](const std::string& what) -> CheckpointError {
      return CheckpointError("truncated checkpoint: " + describe_tensor(section, i, *count, name) +
                             " is missing its " + what);
    };
    const auto len = r.u64();
    if (!len) throw fail("name");
    if (*len > kMaxNameLength) throw CheckpointError("corrupt checkpoint: tensor name too long");
    std::string read_name(*len, '\0');
    if (!r.bytes(read_name.data(), read_name.size())) throw fail("name");
    name = std::move(read_name);
    const auto rank = r.u64();
    if (!rank) throw fail("rank");
    if (*rank > kMaxRank) {
      throw CheckpointError("corrupt checkpoint: " + describe_tensor(section, i, *count, name) +
                            " has rank " + std::to_string(*rank));
    }
    Shape shape;
    std::uint64_t elements = 1;
    for (std::uint64_t d = 0; d < *rank; ++d) {
      const auto e = r.u64();
      if (!e) throw fail("extents");
      shape.push_back(static_cast<std::size_t>(*e));
      elements *= *e;
      if (elements > kMaxElements) {
        throw CheckpointError("corrupt checkpoint: " + describe_tensor(section, i, *count, name) +
                              " is implausibly large");
      }
    }
    std::vector<float> values(static_cast<std::size_t>(elements));
    for (auto& v : values) {
      std::uint32_t bits = 0;
      if (!r.bytes(&bits, sizeof bits)) throw fail("values");
      v = std::bit_cast<float>(to_little(bits));
    }
    out.emplace_back(name, Tensor<float>::from_data(std::move(shape), std::move(values)));
  }
  return out;
}

std::vector<std::string> expected_names_for(const std::string& fingerprint) {
  try {
    std::vector<std::string> names;
    for (const auto& spec : nn::parameter_specs(nn::UNetConfig::from_fingerprint(fingerprint))) {
      names.push_back(spec.name);
    }
    return names;
  } catch (const std::exception&) {
    return {};
  }
}

}  // namespace

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  os.write(kCheckpointMagic, 8);
  put_u64(os, ckpt.fingerprint.size());
  os.write(ckpt.fingerprint.data(), static_cast<std::streamsize>(ckpt.fingerprint.size()));
  put_tensors(os, ckpt.tensors);
  put_tensors(os, ckpt.optimizer);
  put_u64(os, ckpt.step);
  if (!os) throw CheckpointError("checkpoint: write failed");
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("checkpoint: cannot open '" + path.string() + "' for writing");
  write_checkpoint(os, ckpt);
}

Checkpoint read_checkpoint(std::istream& is) {
  Reader r(is);
  char magic[8];
  if (!r.bytes(magic, 8)) throw CheckpointError("truncated checkpoint: missing header");
  if (std::memcmp(magic, kCheckpointMagic, 6) != 0) {
    throw CheckpointError("not a checkpoint: bad magic");
  }
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw CheckpointError("unsupported checkpoint version '" + std::string(magic + 5, 3) + "'");
  }
  Checkpoint ckpt;
  const auto flen = r.u64();
  if (!flen) throw CheckpointError("truncated checkpoint: missing fingerprint");
  if (*flen > kMaxNameLength) throw CheckpointError("corrupt checkpoint: fingerprint too long");
  ckpt.fingerprint.resize(*flen);
  if (!r.bytes(ckpt.fingerprint.data(), ckpt.fingerprint.size())) {
    throw CheckpointError("truncated checkpoint: missing fingerprint");
  }
  ckpt.tensors = read_tensors(r, "parameter", expected_names_for(ckpt.fingerprint));
  ckpt.optimizer = read_tensors(r, "optimizer", {});
  const auto step = r.u64();
  if (!step) throw CheckpointError("truncated checkpoint: missing training step");
  ckpt.step = *step;
  return ckpt;
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("checkpoint: cannot open '" + path.string() + "'");
  return read_checkpoint(is);
}

Checkpoint make_checkpoint(const nn::NetworkParams<float>& params, const Adam<float>* optimizer,
                           std::uint64_t step) {
  Checkpoint ckpt;
  ckpt.fingerprint = params.fingerprint();
  for (const auto& [name, t] : params.entries()) ckpt.tensors.emplace_back(name, t.detach());
  if (optimizer) {
    const auto& ps = optimizer->params();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const auto& shape = ps[i].second.shape();
      ckpt.optimizer.emplace_back("m/" + ps[i].first,
                                  Tensor<float>::from_data(shape, optimizer->first_moments()[i]));
      ckpt.optimizer.emplace_back("v/" + ps[i].first,
                                  Tensor<float>::from_data(shape, optimizer->second_moments()[i]));
    }
  }
  ckpt.step = step;
  return ckpt;
}

nn::UNetConfig config_from_checkpoint(const Checkpoint& ckpt) {
  try {
    return nn::UNetConfig::from_fingerprint(ckpt.fingerprint);
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
}

nn::NetworkParams<float> params_from_checkpoint(const Checkpoint& ckpt,
                                                const nn::UNetConfig& expected,
                                                bool requires_grad) {
  if (ckpt.fingerprint != expected.fingerprint()) {
    throw FingerprintMismatch("checkpoint architecture '" + ckpt.fingerprint +
                              "' does not match expected '" + expected.fingerprint() + "'");
  }
  nn::NetworkParams<float> params(ckpt.fingerprint);
  for (const auto& [name, t] : ckpt.tensors) params.add(name, t.clone(requires_grad));
  try {
    nn::validate_params(params, expected);
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
  return params;
}

void restore_optimizer(const Checkpoint& ckpt, Adam<float>& optimizer) {
  if (ckpt.optimizer.empty()) return;
  std::vector<std::vector<float>> first, second;
  auto lookup = [&](const std::string& name) -> const Tensor<float>& {
    for (const auto& [n, t] : ckpt.optimizer) {
      if (n == name) return t;
    }
    throw CheckpointError("checkpoint: optimizer state missing '" + name + "'");
  };
  for (const auto& [name, p] : optimizer.params()) {
    auto m = lookup("m/" + name).data();
    auto v = lookup("v/" + name).data();
    first.emplace_back(m.begin(), m.end());
    second.emplace_back(v.begin(), v.end());
  }
  try {
    optimizer.restore(ckpt.step, std::move(first), std::move(second));
  } catch (const ShapeError& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace tsnca
