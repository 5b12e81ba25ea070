#include "pileload/controllers/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <vector>

namespace pileload::ctl {

namespace {

using Kind = CheckpointError::Kind;

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

double get_f64(const char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[b])) << (8 * b);
  }
  return std::bit_cast<double>(bits);
}

struct TensorDecl {
  std::string name;
  std::size_t rows;
  std::size_t cols;
};

std::vector<TensorDecl> declarations(const ControllerParams& params) {
  std::vector<TensorDecl> decls;
  for (const nn::ParamSet* ps : {&params.theta, &params.psi}) {
    for (std::size_t i = 0; i < ps->size(); ++i) {
      decls.push_back({ps->name(i), ps->value(i).rows(), ps->value(i).cols()});
    }
  }
  return decls;
}

std::size_t parse_count(const std::string& token, const std::string& what) {
  std::size_t pos = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(token, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != token.size() || token.empty()) {
    throw CheckpointError(Kind::bad_header, "checkpoint: bad " + what + " '" + token + "'");
  }
  return v;
}

}  // namespace

std::string serialize_checkpoint(const ControllerParams& params) {
  const ControllerSpec& spec = params.spec;
  std::string out = "PILECTL v1 ";
  out += to_string(spec.kind);
  out += " " + std::to_string(spec.input_dim) + " ";
  out += spec.attention_input_dim ? std::to_string(*spec.attention_input_dim) : "-";
  out += params.norm ? " norm:zscore\n" : " norm:none\n";
  for (const auto& d : declarations(params)) {
    out += d.name + " " + std::to_string(d.rows) + " " + std::to_string(d.cols) + "\n";
  }
  out += "\n";
  for (const nn::ParamSet* ps : {&params.theta, &params.psi}) {
    for (std::size_t i = 0; i < ps->size(); ++i) {
      for (double v : ps->value(i).values()) put_f64(out, v);
    }
  }
  if (params.norm) {
    for (double v : params.norm->mean) put_f64(out, v);
    for (double v : params.norm->stddev) put_f64(out, v);
  }
  return out;
}

ControllerParams parse_checkpoint(const std::string& bytes) {
  const std::size_t header_end = bytes.find("\n\n");
  if (header_end == std::string::npos) {
    throw CheckpointError(Kind::bad_header, "checkpoint: missing header terminator");
  }
  std::istringstream header(bytes.substr(0, header_end + 1));
  std::string line;
  std::getline(header, line);
  std::istringstream first(line);
  std::string magic, version, kind_s, in_s, att_s, norm_s, extra;
  first >> magic >> version >> kind_s >> in_s >> att_s >> norm_s;
  if (magic != "PILECTL") {
    throw CheckpointError(Kind::bad_header, "checkpoint: bad magic '" + magic + "'");
  }
  if (version != "v1") {
    throw CheckpointError(Kind::bad_header, "checkpoint: unsupported version '" + version + "'");
  }
  if (first >> extra) throw CheckpointError(Kind::bad_header, "checkpoint: trailing header fields");
  const auto kind = parse_kind(kind_s);
  if (!kind) throw CheckpointError(Kind::bad_header, "checkpoint: unknown kind '" + kind_s + "'");
  if (norm_s != "norm:zscore" && norm_s != "norm:none") {
    throw CheckpointError(Kind::bad_header, "checkpoint: bad normalization tag '" + norm_s + "'");
  }

  ControllerSpec spec;
  spec.kind = *kind;
  spec.input_dim = parse_count(in_s, "input_dim");
  if (att_s != "-") spec.attention_input_dim = parse_count(att_s, "attention_input_dim");
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(Kind::bad_header, std::string("checkpoint: ") + e.what());
  }

  // Shapes are fully determined by the spec; the file must agree.
  nn::Rng unused(0);
  ControllerParams params = build_controller(spec, unused);
  const auto expected = declarations(params);
  std::size_t index = 0;
  while (std::getline(header, line)) {
    if (line.empty()) break;
    std::istringstream ls(line);
    std::string name, r_s, c_s;
    ls >> name >> r_s >> c_s;
    if (index >= expected.size()) {
      throw CheckpointError(Kind::shape_mismatch,
                            "checkpoint: unexpected tensor '" + name + "' for " + kind_s);
    }
    const auto& want = expected[index];
    const std::size_t rows = parse_count(r_s, "row count");
    const std::size_t cols = parse_count(c_s, "column count");
    if (name != want.name || rows != want.rows || cols != want.cols) {
      throw CheckpointError(Kind::shape_mismatch,
                            "checkpoint: tensor " + std::to_string(index) + " declared " + name +
                                " " + std::to_string(rows) + "x" + std::to_string(cols) +
                                ", expected " + want.name + " " + std::to_string(want.rows) +
                                "x" + std::to_string(want.cols));
    }
    ++index;
  }
  if (index != expected.size()) {
    throw CheckpointError(Kind::shape_mismatch, "checkpoint: declares " + std::to_string(index) +
                                                    " tensors, expected " +
                                                    std::to_string(expected.size()));
  }

  const bool has_norm = norm_s == "norm:zscore";
  const std::size_t features = spec.feature_channels().size();
  const std::size_t doubles = params.parameter_count() + (has_norm ? 2 * features : 0);
  const std::size_t payload_begin = header_end + 2;
  const std::size_t want_bytes = doubles * 8;
  const std::size_t have_bytes = bytes.size() - payload_begin;
  if (have_bytes < want_bytes) {
    throw CheckpointError(Kind::truncated, "checkpoint: payload truncated, expected " +
                                               std::to_string(want_bytes) + " bytes, found " +
                                               std::to_string(have_bytes));
  }
  if (have_bytes > want_bytes) {
    throw CheckpointError(Kind::trailing_data,
                          "checkpoint: " + std::to_string(have_bytes - want_bytes) +
                              " unexpected bytes after payload");
  }

  const char* p = bytes.data() + payload_begin;
  for (nn::ParamSet* ps : {&params.theta, &params.psi}) {
    for (std::size_t i = 0; i < ps->size(); ++i) {
      for (double& v : ps->value(i).values()) {
        v = get_f64(p);
        p += 8;
      }
    }
  }
  if (has_norm) {
    Normalization norm;
    norm.mean.resize(features);
    norm.stddev.resize(features);
    for (double& v : norm.mean) {
      v = get_f64(p);
      p += 8;
    }
    for (double& v : norm.stddev) {
      v = get_f64(p);
      p += 8;
    }
    params.norm = std::move(norm);
  }
  return params;
}

void save_checkpoint(const ControllerParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(Kind::io, "cannot write checkpoint " + path.string());
  const std::string bytes = serialize_checkpoint(params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(Kind::io, "failed writing checkpoint " + path.string());
}

ControllerParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::io, "cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

}  // namespace pileload::ctl
