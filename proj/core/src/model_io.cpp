#include "dnncov/model_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "base64.hpp"
#include "dnncov/error.hpp"

namespace dnncov {

namespace {

using nlohmann::json;

constexpr std::string_view kFormatTag = "dnncov-model";

[[noreturn]] void fail_field(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::kParse, "field '" + path + "': " + what);
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) fail_field(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail_field(path.empty() ? key : path + "." + key, "missing");
  return *it;
}

std::size_t as_count(const json& v, const std::string& path) {
  if (!v.is_number_unsigned()) fail_field(path, "expected a non-negative integer");
  return v.get<std::size_t>();
}

std::size_t count_field(const json& obj, const std::string& key, const std::string& path) {
  return as_count(require(obj, key, path), path + "." + key);
}

std::size_t count_field_or(const json& obj, const std::string& key, const std::string& path, std::size_t dflt) {
  if (!obj.contains(key)) return dflt;
  return as_count(obj.at(key), path + "." + key);
}

std::string string_field(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_string()) fail_field(path + "." + key, "expected a string");
  return v.get<std::string>();
}

Shape shape_field(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) fail_field(path, "expected a non-empty array of dimensions");
  Shape s;
  std::size_t total = 1;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::size_t d = as_count(v[i], path + "[" + std::to_string(i) + "]");
    if (d == 0) fail_field(path, "dimensions must be positive");
    if (total > std::numeric_limits<std::uint32_t>::max() / d) fail_field(path, "shape too large");
    total *= d;
    s.push_back(d);
  }
  return s;
}

LayerSpec parse_layer(const json& j, const std::string& path) {
  const std::string kind_name = string_field(j, "kind", path);
  const LayerKind kind = parse_layer_kind(kind_name);
  Activation fn = Activation::kIdentity;
  if (j.contains("activation")) {
    const json& a = j.at("activation");
    if (!a.is_string()) fail_field(path + ".activation", "expected a string");
    fn = parse_activation(a.get<std::string>());
  }
  switch (kind) {
    case LayerKind::kDense:
      return LayerSpec::dense(count_field(j, "in_dim", path), count_field(j, "out_dim", path), fn);
    case LayerKind::kConv2d: {
      Conv2dParams p;
      p.in_channels = count_field(j, "in_channels", path);
      p.out_channels = count_field(j, "out_channels", path);
      p.kernel_h = count_field(j, "kernel_h", path);
      p.kernel_w = count_field(j, "kernel_w", path);
      p.stride = count_field_or(j, "stride", path, 1);
      p.padding = count_field_or(j, "padding", path, 0);
      return LayerSpec::conv2d(p, fn);
    }
    case LayerKind::kMaxPool2d:
    case LayerKind::kAvgPool2d: {
      const std::size_t window = count_field(j, "window", path);
      const std::size_t stride = count_field_or(j, "stride", path, window);
      LayerSpec s = kind == LayerKind::kMaxPool2d ? LayerSpec::max_pool(window, stride)
                                                   : LayerSpec::avg_pool(window, stride);
      s.activation = fn;
      return s;
    }
    case LayerKind::kFlatten: {
      LayerSpec s = LayerSpec::flatten();
      s.activation = fn;
      return s;
    }
    case LayerKind::kActivation:
      if (!j.contains("activation")) fail_field(path + ".activation", "missing");
      return LayerSpec::activation_layer(fn);
  }
  fail_field(path + ".kind", "unsupported");
}

json layer_to_json(const LayerSpec& s) {
  json j;
  j["kind"] = std::string(to_string(s.kind));
  switch (s.kind) {
    case LayerKind::kDense:
      j["in_dim"] = s.dense_params().in_dim;
      j["out_dim"] = s.dense_params().out_dim;
      break;
    case LayerKind::kConv2d: {
      const auto& p = s.conv_params();
      j["in_channels"] = p.in_channels;
      j["out_channels"] = p.out_channels;
      j["kernel_h"] = p.kernel_h;
      j["kernel_w"] = p.kernel_w;
      j["stride"] = p.stride;
      j["padding"] = p.padding;
      break;
    }
    case LayerKind::kMaxPool2d:
    case LayerKind::kAvgPool2d:
      j["window"] = s.pool_params().window;
      j["stride"] = s.pool_params().stride;
      break;
    case LayerKind::kFlatten:
    case LayerKind::kActivation:
      break;
  }
  if (s.has_weights() || s.kind == LayerKind::kActivation) j["activation"] = std::string(to_string(s.activation));
  return j;
}

float load_f32_le(const std::uint8_t* p) {
  std::uint32_t u = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                    (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(u);
}

void store_f32_le(float f, std::vector<std::uint8_t>& out) {
  const auto u = std::bit_cast<std::uint32_t>(f);
  out.push_back(static_cast<std::uint8_t>(u & 0xFF));
  out.push_back(static_cast<std::uint8_t>((u >> 8) & 0xFF));
  out.push_back(static_cast<std::uint8_t>((u >> 16) & 0xFF));
  out.push_back(static_cast<std::uint8_t>((u >> 24) & 0xFF));
}

std::vector<std::uint8_t> read_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string line_context(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

NetworkModel parse_header(const json& root, const std::filesystem::path& base_dir) {
  if (!root.is_object()) fail_field("", "model header must be a JSON object");
  if (root.contains("format") && (!root.at("format").is_string() || root.at("format").get<std::string>() != kFormatTag)) {
    fail_field("format", "expected \"" + std::string(kFormatTag) + "\"");
  }
  const json& version = require(root, "format_version", "");
  if (!version.is_number_integer() || version.get<long long>() != kModelFormatVersion) {
    fail_field("format_version", "unsupported version (expected " + std::to_string(kModelFormatVersion) + ")");
  }

  std::string name = string_field(root, "name", "");
  Shape input_shape = shape_field(require(root, "input_shape", ""), "input_shape");

  const json& layers_json = require(root, "layers", "");
  if (!layers_json.is_array() || layers_json.empty()) fail_field("layers", "expected a non-empty array");
  std::vector<LayerSpec> layers;
  for (std::size_t k = 0; k < layers_json.size(); ++k) {
    layers.push_back(parse_layer(layers_json[k], "layers[" + std::to_string(k) + "]"));
  }

  std::vector<std::size_t> coverage;
  if (root.contains("coverage_layers")) {
    const json& c = root.at("coverage_layers");
    if (!c.is_array() || c.empty()) fail_field("coverage_layers", "expected a non-empty array");
    for (std::size_t i = 0; i < c.size(); ++i) {
      coverage.push_back(as_count(c[i], "coverage_layers[" + std::to_string(i) + "]"));
    }
  }

  // Payload.
  const json& payload = require(root, "payload", "");
  const std::string encoding = string_field(payload, "encoding", "payload");
  std::vector<std::uint8_t> bytes;
  if (encoding == "base64") {
    const json& data = require(payload, "data", "payload");
    if (!data.is_string()) fail_field("payload.data", "expected a base64 string");
    auto decoded = detail::base64_decode(data.get_ref<const std::string&>());
    if (!decoded) fail_field("payload.data", "malformed base64");
    bytes = std::move(*decoded);
  } else if (encoding == "file") {
    const std::filesystem::path rel = string_field(payload, "path", "payload");
    bytes = read_binary(rel.is_absolute() ? rel : base_dir / rel);
  } else {
    fail_field("payload.encoding", "expected \"base64\" or \"file\"");
  }
  if (payload.contains("byte_length") && as_count(payload.at("byte_length"), "payload.byte_length") != bytes.size()) {
    throw Error(ErrorCode::kShapeMismatch, "payload holds " + std::to_string(bytes.size()) +
                                               " bytes but header declares " +
                                               std::to_string(payload.at("byte_length").get<std::size_t>()));
  }

  // Tensor manifest.
  std::vector<Tensor> weights(layers.size());
  std::vector<Tensor> biases(layers.size());
  std::vector<bool> have_w(layers.size(), false), have_b(layers.size(), false);
  const json& tensors = require(root, "tensors", "");
  if (!tensors.is_array()) fail_field("tensors", "expected an array");
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    const std::string path = "tensors[" + std::to_string(t) + "]";
    const json& entry = tensors[t];
    const std::size_t layer = count_field(entry, "layer", path);
    const std::string role = string_field(entry, "role", path);
    const Shape shape = shape_field(require(entry, "shape", path), path + ".shape");
    const std::size_t offset = count_field(entry, "offset", path);
    const std::size_t byte_length = count_field(entry, "byte_length", path);
    const std::string label = "layer " + std::to_string(layer) + " " + role;
    if (layer >= layers.size()) fail_field(path + ".layer", "out of range");
    if (!layers[layer].has_weights()) fail_field(path + ".layer", "layer has no parameters");
    if (role != "weight" && role != "bias") fail_field(path + ".role", "expected \"weight\" or \"bias\"");
    auto& seen = role == "weight" ? have_w : have_b;
    if (seen[layer]) fail_field(path, "duplicate " + label + " tensor");
    seen[layer] = true;

    const std::size_t count = element_count(shape);
    if (byte_length != count * 4) {
      throw Error(ErrorCode::kShapeMismatch, "tensor '" + label + "': byte_length " + std::to_string(byte_length) +
                                                 " contradicts shape " + shape_to_string(shape) + " (" +
                                                 std::to_string(count * 4) + " bytes)");
    }
    if (offset > bytes.size() || bytes.size() - offset < byte_length) {
      throw Error(ErrorCode::kShapeMismatch, "tensor '" + label + "': payload too short for offset " +
                                                 std::to_string(offset) + " + " + std::to_string(byte_length));
    }
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) values[i] = load_f32_le(bytes.data() + offset + 4 * i);
    Tensor tensor;
    try {
      tensor = Tensor(shape, std::move(values));
    } catch (const Error& e) {
      throw Error(e.code(), "tensor '" + label + "': " + e.what());
    }
    (role == "weight" ? weights : biases)[layer] = std::move(tensor);
  }
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (layers[k].has_weights() && (!have_w[k] || !have_b[k])) {
      throw Error(ErrorCode::kShapeMismatch, "layer " + std::to_string(k) + " is missing its " +
                                                 (have_w[k] ? "bias" : "weight") + " tensor");
    }
  }

  return NetworkModel::create(std::move(name), std::move(input_shape), std::move(layers), std::move(weights),
                              std::move(biases), std::move(coverage));
}

json header_without_payload(const NetworkModel& model, std::vector<std::uint8_t>& bytes) {
  json root;
  root["format"] = std::string(kFormatTag);
  root["format_version"] = kModelFormatVersion;
  root["name"] = model.name();
  root["input_shape"] = model.input_shape();
  json layers = json::array();
  for (const auto& s : model.layers()) layers.push_back(layer_to_json(s));
  root["layers"] = std::move(layers);
  root["coverage_layers"] = model.coverage_layers();
  json tensors = json::array();
  for (std::size_t k = 0; k < model.layer_count(); ++k) {
    if (!model.layer(k).has_weights()) continue;
    for (const char* role : {"weight", "bias"}) {
      const Tensor& t = std::string_view(role) == "weight" ? model.weight(k) : model.bias(k);
      json entry;
      entry["layer"] = k;
      entry["role"] = role;
      entry["shape"] = t.shape();
      entry["offset"] = bytes.size();
      entry["byte_length"] = t.size() * 4;
      tensors.push_back(std::move(entry));
      for (double v : t.data()) store_f32_le(static_cast<float>(v), bytes);
    }
  }
  root["tensors"] = std::move(tensors);
  return root;
}

}  // namespace

NetworkModel parse_model(std::string_view text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, "model header is not valid JSON at " + line_context(text, e.byte));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("model header is not valid JSON: ") + e.what());
  }
  try {
    return parse_header(root, base_dir);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("model header: ") + e.what());
  }
}

NetworkModel load_model(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return parse_model(text, path.parent_path());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string serialize_model(const NetworkModel& model) {
  std::vector<std::uint8_t> bytes;
  json root = header_without_payload(model, bytes);
  root["payload"] = {{"encoding", "base64"}, {"byte_length", bytes.size()}, {"data", detail::base64_encode(bytes)}};
  return root.dump(2) + "\n";
}

void save_model(const NetworkModel& model, const std::filesystem::path& path, PayloadEncoding encoding) {
  std::string text;
  if (encoding == PayloadEncoding::kBase64) {
    text = serialize_model(model);
  } else {
    std::vector<std::uint8_t> bytes;
    json root = header_without_payload(model, bytes);
    std::filesystem::path bin = path;
    bin.replace_extension(".bin");
    root["payload"] = {{"encoding", "file"}, {"byte_length", bytes.size()}, {"path", bin.filename().string()}};
    std::ofstream out(bin, std::ios::binary);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + bin.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIo, "write failed for " + bin.string());
    text = root.dump(2) + "\n";
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace dnncov
