#include "freerun/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "freerun/errors.hpp"

namespace freerun {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string location(const std::string& source, std::size_t line, std::size_t column) {
  return source + ":" + std::to_string(line) + ": column " + std::to_string(column);
}

void append_double(std::string& out, double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, end);
}

}  // namespace

Dataset read_dataset_csv(std::istream& is, const std::string& source) {
  std::string line;
  if (!std::getline(is, line)) throw DataError(source + ": empty file");
  const auto header = split_fields(line);
  if (header.empty() || trim(header[0]) != "k")
    throw DataError(location(source, 1, 1) + ": header must start with 'k'");

  Index nu = 0;
  Index ny = 0;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const std::string name = trim(header[c]);
    const std::string expected_u = "u" + std::to_string(nu + 1);
    const std::string expected_y = "y" + std::to_string(ny + 1);
    if (ny == 0 && name == expected_u) {
      ++nu;
    } else if (name == expected_y) {
      ++ny;
    } else {
      throw DataError(location(source, 1, c + 1) + ": unexpected column '" + name + "', expected '" +
                      (ny == 0 ? expected_u + "' or '" : std::string{}) + expected_y + "'");
    }
  }
  if (nu == 0 || ny == 0) throw DataError(source + ": header needs at least one u and one y column");

  std::vector<double> values;
  std::size_t line_no = 1;
  Index rows = 0;
  const auto width = static_cast<std::size_t>(1 + nu + ny);
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != width) {
      throw DataError(location(source, line_no, std::min(fields.size(), width) + 1) + ": expected " +
                      std::to_string(width) + " fields, found " + std::to_string(fields.size()));
    }
    for (std::size_t c = 1; c < width; ++c) {
      const std::string text = trim(fields[c]);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
        throw DataError(location(source, line_no, c + 1) + ": cannot parse '" + text + "' as a number");
      }
      if (!std::isfinite(v)) throw DataError(location(source, line_no, c + 1) + ": value '" + text + "' is not finite");
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw DataError(source + ": no data rows");

  Dataset data;
  data.u.resize(rows, nu);
  data.y.resize(rows, ny);
  const auto stride = static_cast<std::size_t>(nu + ny);
  for (Index r = 0; r < rows; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * stride;
    for (Index c = 0; c < nu; ++c) data.u(r, c) = values[base + static_cast<std::size_t>(c)];
    for (Index c = 0; c < ny; ++c) data.y(r, c) = values[base + static_cast<std::size_t>(nu + c)];
  }
  return data;
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  return read_dataset_csv(in, path.string());
}

void write_dataset_csv(std::ostream& os, const Dataset& data) {
  if (data.u.rows() != data.y.rows()) throw DataError("dataset input and output row counts differ");
  std::string out = "k";
  for (Index c = 0; c < data.num_inputs(); ++c) out += ",u" + std::to_string(c + 1);
  for (Index c = 0; c < data.num_outputs(); ++c) out += ",y" + std::to_string(c + 1);
  out += '\n';
  for (Index r = 0; r < data.size(); ++r) {
    out += std::to_string(r + 1);
    for (Index c = 0; c < data.num_inputs(); ++c) {
      out += ',';
      append_double(out, data.u(r, c));
    }
    for (Index c = 0; c < data.num_outputs(); ++c) {
      out += ',';
      append_double(out, data.y(r, c));
    }
    out += '\n';
  }
  os << out;
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_dataset_csv(out, data);
  if (!out) throw DataError("write failed for " + path.string());
}

void write_series_csv(std::ostream& os, const MatrixXd& values, const std::string& prefix) {
  std::string out = "k";
  for (Index c = 0; c < values.cols(); ++c) out += "," + prefix + std::to_string(c + 1);
  out += '\n';
  for (Index r = 0; r < values.rows(); ++r) {
    out += std::to_string(r + 1);
    for (Index c = 0; c < values.cols(); ++c) {
      out += ',';
      append_double(out, values(r, c));
    }
    out += '\n';
  }
  os << out;
}

namespace {

std::vector<double> to_vector(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

VectorXd from_json_vector(const nlohmann::json& j, const char* name) {
  if (!j.is_array()) throw DataError(std::string("model file: '") + name + "' must be an array");
  VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw DataError(std::string("model file: '") + name + "' has a non-numeric entry");
    v[static_cast<Index>(i)] = j[i].get<double>();
  }
  return v;
}

const char* activation_name(Activation a) { return a == Activation::tanh ? "tanh" : "identity"; }

Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  throw DataError("model file: unknown activation '" + s + "'");
}

}  // namespace

nlohmann::json model_to_json(const DynamicModel& model, const nlohmann::json& training) {
  nlohmann::json doc;
  doc["format"] = "freerun-model";
  doc["version"] = 1;
  doc["orders"] = {{"ny", model.orders.ny}, {"nu", model.orders.nu}, {"tau_d", model.orders.tau_d}};
  doc["input_size"] = model.net.input_size();
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : model.net.structure().layers) {
    layers.push_back({{"size", l.size}, {"activation", activation_name(l.activation)}});
  }
  doc["layers"] = layers;
  doc["scalers"] = {{"u_mean", to_vector(model.scalers.u.mean)},
                    {"u_scale", to_vector(model.scalers.u.scale)},
                    {"y_mean", to_vector(model.scalers.y.mean)},
                    {"y_scale", to_vector(model.scalers.y.scale)}};
  doc["params"] = to_vector(pack_params(model.net));
  doc["training"] = training;
  return doc;
}

ModelFile model_from_json(const nlohmann::json& doc) {
  try {
    if (doc.value("format", std::string{}) != "freerun-model") throw DataError("not a freerun model file");
    if (doc.at("version").get<int>() != 1) throw DataError("unsupported model file version");
    ModelOrders orders;
    orders.ny = doc.at("orders").at("ny").get<Index>();
    orders.nu = doc.at("orders").at("nu").get<Index>();
    orders.tau_d = doc.at("orders").at("tau_d").get<Index>();
    try {
      orders.validate();
    } catch (const StructuralError& e) {
      throw DataError(std::string("model file: ") + e.what());
    }

    NetStructure structure;
    structure.input_size = doc.at("input_size").get<Index>();
    for (const auto& l : doc.at("layers")) {
      structure.layers.push_back({l.at("size").get<Index>(), parse_activation(l.at("activation").get<std::string>())});
    }
    try {
      structure.validate();
    } catch (const StructuralError& e) {
      throw DataError(std::string("model file: ") + e.what());
    }

    const auto& sc = doc.at("scalers");
    Scalers scalers{{from_json_vector(sc.at("u_mean"), "u_mean"), from_json_vector(sc.at("u_scale"), "u_scale")},
                    {from_json_vector(sc.at("y_mean"), "y_mean"), from_json_vector(sc.at("y_scale"), "y_scale")}};
    if (scalers.u.mean.size() != scalers.u.scale.size() || scalers.y.mean.size() != scalers.y.scale.size()) {
      throw DataError("model file: scaler mean and scale lengths differ");
    }

    ModelFile file{
        DynamicModel{unpack_params(from_json_vector(doc.at("params"), "params"), structure), orders, scalers},
        doc.value("training", nlohmann::json::object())};
    try {
      file.model.validate();
    } catch (const StructuralError& e) {
      throw DataError(std::string("model file: ") + e.what());
    }
    return file;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

void save_model(const std::filesystem::path& path, const DynamicModel& model, const nlohmann::json& training) {
  write_json(path, model_to_json(model, training));
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return model_from_json(doc);
}

}  // namespace freerun
