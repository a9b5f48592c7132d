// Apache License, Version 2.0, refer to LICENSE.txt
#include "sanmix/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "sanmix/math.hpp"

namespace sanmix {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

std::string format_double(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

// RFC-4180 field splitting with double-quote escapes.
std::vector<std::string> split_csv_line(const std::string& line, long row) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(ch);
      }
    } else if (ch == '"' && current.empty()) {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  if (quoted)
    throw ParseError("unterminated quoted field", row, fields.size() + 1);
  fields.push_back(std::move(current));
  return fields;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += "\"\"";
    else out.push_back(ch);
  }
  out += "\"";
  return out;
}

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const json& rows) {
  const auto n_rows = rows.size();
  if (n_rows == 0) return MatrixXd(0, 0);
  const auto n_cols = rows.at(0).size();
  MatrixXd m(n_rows, n_cols);
  for (std::size_t r = 0; r < n_rows; ++r)
    for (std::size_t c = 0; c < n_cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          rows.at(r).at(c).get<double>();
  return m;
}

json vector_to_json(const VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

VectorXd vector_from_json(const json& arr) {
  VectorXd v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = arr.at(i).get<double>();
  return v;
}

}  // namespace

GroupedDataset load_grouped_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open CSV file: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw ParseError("empty CSV file: " + path, 0, 0);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv_line(line, 1);
  if (header.size() < 2)
    throw ParseError("need a group column plus at least one feature column",
                     1, 1);
  const int d = static_cast<int>(header.size()) - 1;

  GroupedDataset data;
  data.d = d;
  std::vector<std::vector<std::vector<double>>> buffers;
  std::vector<std::string> keys;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line, row);
    if (static_cast<int>(fields.size()) != d + 1)
      throw ParseError("row " + std::to_string(row) + ": expected " +
                           std::to_string(d + 1) + " fields, found " +
                           std::to_string(fields.size()),
                       row, fields.size());
    if (fields[0].empty())
      throw ParseError("row " + std::to_string(row) + ": empty group key",
                       row, 1);
    std::vector<double> values(d);
    for (int c = 0; c < d; ++c) {
      const std::string& cell = fields[c + 1];
      if (cell.empty())
        throw ParseError("row " + std::to_string(row) + ", column " +
                             std::to_string(c + 2) + ": missing value",
                         row, c + 2);
      std::size_t used = 0;
      try {
        values[c] = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw ParseError("row " + std::to_string(row) + ", column " +
                             std::to_string(c + 2) + ": not numeric: " + cell,
                         row, c + 2);
      }
      if (used != cell.size())
        throw ParseError("row " + std::to_string(row) + ", column " +
                             std::to_string(c + 2) + ": not numeric: " + cell,
                         row, c + 2);
    }
    auto it = std::find(keys.begin(), keys.end(), fields[0]);
    std::size_t gi;
    if (it == keys.end()) {
      gi = keys.size();
      keys.push_back(fields[0]);
      buffers.emplace_back();
    } else {
      gi = static_cast<std::size_t>(it - keys.begin());
    }
    buffers[gi].push_back(std::move(values));
  }
  if (keys.empty()) throw ParseError("no data rows in " + path, row, 0);

  data.group_keys = keys;
  for (std::size_t g = 0; g < buffers.size(); ++g) {
    MatrixXd block(buffers[g].size(), d);
    for (std::size_t r = 0; r < buffers[g].size(); ++r)
      for (int c = 0; c < d; ++c) block(r, c) = buffers[g][r][c];
    data.groups.push_back(std::move(block));
  }
  data.validate();
  return data;
}

void save_grouped_csv(const GroupedDataset& data, const std::string& path) {
  data.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write CSV file: " + path);
  out << "group";
  for (int c = 1; c <= data.d; ++c) out << ",y" << c;
  out << "\n";
  for (int j = 0; j < data.num_groups(); ++j)
    for (int i = 0; i < data.groups[j].rows(); ++i) {
      out << csv_escape(data.group_keys[j]);
      for (int c = 0; c < data.d; ++c)
        out << "," << format_double(data.groups[j](i, c));
      out << "\n";
    }
}

void save_truth_json(const GroundTruth& truth, const std::string& path) {
  json doc;
  doc["schema_version"] = 1;
  doc["s_true"] = truth.s_true;
  doc["m_true"] = truth.m_true;
  json comps = json::array();
  for (const auto& comp : truth.components) {
    json c;
    c["mean"] = vector_to_json(comp.mean);
    c["cov"] = matrix_to_json(comp.cov);
    comps.push_back(std::move(c));
  }
  doc["components"] = std::move(comps);
  doc["cluster_weights"] = truth.cluster_weights;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write truth file: " + path);
  out << doc.dump(2) << "\n";
}

GroundTruth load_truth_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open truth file: " + path);
  json doc = json::parse(in);
  GroundTruth truth;
  truth.s_true = doc.at("s_true").get<std::vector<int>>();
  truth.m_true = doc.at("m_true").get<std::vector<std::vector<int>>>();
  for (const auto& c : doc.at("components")) {
    MixtureComponent comp;
    comp.mean = vector_from_json(c.at("mean"));
    comp.cov = matrix_from_json(c.at("cov"));
    truth.components.push_back(std::move(comp));
  }
  truth.cluster_weights =
      doc.at("cluster_weights").get<std::vector<std::vector<double>>>();
  return truth;
}

GroupedDataset probit_preprocess(
    const GroupedDataset& data,
    const std::optional<std::vector<ColumnBounds>>& bounds) {
  data.validate();
  constexpr double kEps = 1e-6;
  std::vector<ColumnBounds> limits(data.d);
  if (bounds) {
    if (static_cast<int>(bounds->size()) != data.d)
      throw ShapeError("probit_preprocess: one bound pair per column required");
    limits = *bounds;
  } else {
    for (int c = 0; c < data.d; ++c) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (const auto& g : data.groups)
        for (int i = 0; i < g.rows(); ++i) {
          lo = std::min(lo, g(i, c));
          hi = std::max(hi, g(i, c));
        }
      limits[c] = {lo - kEps, hi + kEps};
    }
  }
  for (int c = 0; c < data.d; ++c)
    if (!(limits[c].hi > limits[c].lo))
      throw PreprocessError("probit_preprocess: column " + std::to_string(c + 1) +
                            " is constant (max equals min)");

  GroupedDataset out = data;
  for (auto& g : out.groups)
    for (int i = 0; i < g.rows(); ++i)
      for (int c = 0; c < data.d; ++c) {
        double scaled =
            (g(i, c) - limits[c].lo) / (limits[c].hi - limits[c].lo);
        scaled = std::min(std::max(scaled, kEps), 1.0 - kEps);
        g(i, c) = math::normal_quantile(scaled);
      }
  return out;
}

GroupedDataset filter_groups(const GroupedDataset& data, long min_size,
                             long max_size) {
  if (min_size > max_size)
    throw std::domain_error("filter_groups: min_size must not exceed max_size");
  GroupedDataset out;
  out.d = data.d;
  for (int j = 0; j < data.num_groups(); ++j) {
    const long size = data.groups[j].rows();
    if (size >= min_size && size <= max_size) {
      out.group_keys.push_back(data.group_keys[j]);
      out.groups.push_back(data.groups[j]);
    }
  }
  if (out.groups.empty())
    throw PreprocessError("filter_groups: no group satisfies the size bounds");
  return out;
}

namespace {

json alpha_to_json(const AlphaPrior& alpha) {
  json out;
  if (alpha.is_fixed) {
    out["type"] = "fixed";
    out["value"] = alpha.value;
  } else {
    out["type"] = "gamma";
    out["shape"] = alpha.shape;
    out["rate"] = alpha.rate;
  }
  return out;
}

AlphaPrior alpha_from_json(const json& doc) {
  if (doc.at("type") == "fixed")
    return AlphaPrior::fixed(doc.at("value").get<double>());
  return AlphaPrior::gamma(doc.at("shape").get<double>(),
                           doc.at("rate").get<double>());
}

json kernel_to_json(const KernelPrior& kernel) {
  json out;
  out["mu0"] = vector_to_json(kernel.mu0);
  out["kappa0"] = kernel.kappa0;
  out["dof"] = kernel.dof;
  out["scale"] = matrix_to_json(kernel.scale);
  return out;
}

KernelPrior kernel_from_json(const json& doc) {
  return KernelPrior::normal_wishart(
      vector_from_json(doc.at("mu0")), doc.at("kappa0").get<double>(),
      doc.at("dof").get<double>(), matrix_from_json(doc.at("scale")));
}

}  // namespace

json state_to_json(const VariationalState& state, const SanConfig& config,
                   const std::vector<std::string>& group_keys) {
  json doc;
  doc["schema_version"] = 1;
  doc["group_keys"] = group_keys;
  json cfg;
  if (const auto* f = std::get_if<FisanConfig>(&config)) {
    doc["model"] = "fisan";
    cfg["L"] = f->L;
    cfg["T"] = f->T;
    cfg["b"] = f->b;
    cfg["alpha"] = alpha_to_json(f->alpha);
    cfg["kernel"] = kernel_to_json(f->kernel);
  } else {
    const auto& fsan = std::get<FsanConfig>(config);
    doc["model"] = "fsan";
    cfg["K"] = fsan.K;
    cfg["L"] = fsan.L;
    cfg["a"] = fsan.a;
    cfg["b"] = fsan.b;
    cfg["kernel"] = kernel_to_json(fsan.kernel);
  }
  doc["config"] = std::move(cfg);
  doc["rho"] = matrix_to_json(state.rho);
  doc["xi"] = matrix_to_json(state.xi);
  doc["p"] = matrix_to_json(state.p);
  if (!state.finite_pi) {
    doc["stick_a"] = vector_to_json(state.stick_a);
    doc["stick_b"] = vector_to_json(state.stick_b);
    if (state.alpha_fixed) {
      doc["alpha_value"] = state.alpha_value;
    } else {
      doc["s1"] = state.s1;
      doc["s2"] = state.s2;
    }
  } else {
    doc["p_tilde"] = vector_to_json(state.p_tilde);
  }
  json kernels = json::array();
  for (const auto& kp : state.kernels) {
    json k;
    k["m"] = vector_to_json(kp.m);
    k["t"] = kp.t;
    k["c"] = kp.c;
    k["D"] = matrix_to_json(kp.D);
    kernels.push_back(std::move(k));
  }
  doc["kernels"] = std::move(kernels);
  doc["elbo_trace"] = state.elbo_trace;
  return doc;
}

LoadedState state_from_json(const json& doc) {
  if (doc.at("schema_version").get<int>() != 1)
    throw std::runtime_error("unsupported state schema version");
  LoadedState loaded;
  loaded.group_keys = doc.at("group_keys").get<std::vector<std::string>>();
  const json& cfg = doc.at("config");
  if (doc.at("model") == "fisan") {
    FisanConfig config;
    config.L = cfg.at("L").get<int>();
    config.T = cfg.at("T").get<int>();
    config.b = cfg.at("b").get<double>();
    config.alpha = alpha_from_json(cfg.at("alpha"));
    config.kernel = kernel_from_json(cfg.at("kernel"));
    loaded.config = config;
  } else {
    FsanConfig config;
    config.K = cfg.at("K").get<int>();
    config.L = cfg.at("L").get<int>();
    config.a = cfg.at("a").get<double>();
    config.b = cfg.at("b").get<double>();
    config.kernel = kernel_from_json(cfg.at("kernel"));
    loaded.config = config;
  }

  VariationalState& state = loaded.state;
  state.finite_pi = doc.at("model") == "fsan";
  state.rho = matrix_from_json(doc.at("rho"));
  state.xi = matrix_from_json(doc.at("xi"));
  state.p = matrix_from_json(doc.at("p"));
  if (!state.finite_pi) {
    state.stick_a = vector_from_json(doc.at("stick_a"));
    state.stick_b = vector_from_json(doc.at("stick_b"));
    if (doc.contains("alpha_value")) {
      state.alpha_fixed = true;
      state.alpha_value = doc.at("alpha_value").get<double>();
    } else {
      state.s1 = doc.at("s1").get<double>();
      state.s2 = doc.at("s2").get<double>();
    }
  } else {
    state.p_tilde = vector_from_json(doc.at("p_tilde"));
  }
  for (const auto& k : doc.at("kernels")) {
    KernelPosterior kp;
    kp.m = vector_from_json(k.at("m"));
    kp.t = k.at("t").get<double>();
    kp.c = k.at("c").get<double>();
    kp.D = matrix_from_json(k.at("D"));
    kp.refresh();
    state.kernels.push_back(std::move(kp));
  }
  state.elbo_trace = doc.at("elbo_trace").get<std::vector<double>>();
  return loaded;
}

void save_state(const VariationalState& state, const SanConfig& config,
                const std::vector<std::string>& group_keys,
                const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write state file: " + path);
  out << state_to_json(state, config, group_keys).dump(2) << "\n";
}

LoadedState load_state(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open state file: " + path);
  return state_from_json(json::parse(in));
}

namespace {

constexpr char kChainMagic[9] = "SANCOL01";

void write_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::ifstream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

static_assert(std::endian::native == std::endian::little,
              "chain files are defined little-endian");

}  // namespace

void save_chain(const ChainStore& chain, bool fisan,
                const std::vector<std::string>& group_keys,
                const std::string& prefix) {
  const int t = chain.num_draws();
  const int n = static_cast<int>(chain.m_draws.cols());
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  auto add = [&](const std::string& name) -> std::vector<double>& {
    names.push_back(name);
    columns.emplace_back(t, 0.0);
    return columns.back();
  };

  for (int j = 0; j < chain.J; ++j) {
    auto& col = add("s_" + std::to_string(j));
    for (int row = 0; row < t; ++row) col[row] = chain.s_draws(row, j);
  }
  for (int i = 0; i < n; ++i) {
    auto& col = add("m_" + std::to_string(i));
    for (int row = 0; row < t; ++row) col[row] = chain.m_draws(row, i);
  }
  if (chain.alpha_draws.size() > 0) {
    auto& col = add("alpha");
    for (int row = 0; row < t; ++row) col[row] = chain.alpha_draws[row];
  }
  for (int j = 0; j < chain.J; ++j)
    for (int l = 0; l < chain.L; ++l) {
      auto& col = add("w_" + std::to_string(j) + "_" + std::to_string(l));
      for (int row = 0; row < t; ++row)
        col[row] = chain.group_weights[row](j, l);
    }
  for (int l = 0; l < chain.L; ++l)
    for (int c = 0; c < chain.d; ++c) {
      auto& col = add("mu_" + std::to_string(l) + "_" + std::to_string(c));
      for (int row = 0; row < t; ++row)
        col[row] = chain.atom_means[row](l, c);
    }
  for (int l = 0; l < chain.L; ++l)
    for (int r = 0; r < chain.d; ++r)
      for (int c = r; c < chain.d; ++c) {
        auto& col = add("prec_" + std::to_string(l) + "_" + std::to_string(r) +
                        "_" + std::to_string(c));
        for (int row = 0; row < t; ++row)
          col[row] = chain.atom_precs[row][l](r, c);
      }

  std::ofstream out(prefix + ".bin", std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write chain file: " + prefix + ".bin");
  out.write(kChainMagic, 8);
  write_u64(out, columns.size());
  write_u64(out, static_cast<std::uint64_t>(t));
  write_u64(out, chain.loglik.size());
  for (const auto& name : names) {
    const std::uint32_t len = static_cast<std::uint32_t>(name.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(name.data(), len);
  }
  for (const auto& col : columns)
    out.write(reinterpret_cast<const char*>(col.data()),
              static_cast<std::streamsize>(col.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(chain.loglik.data()),
            static_cast<std::streamsize>(chain.loglik.size() * sizeof(double)));

  json meta;
  meta["schema_version"] = 1;
  meta["model"] = fisan ? "fisan" : "fsan";
  meta["J"] = chain.J;
  meta["L"] = chain.L;
  meta["d"] = chain.d;
  meta["group_sizes"] = std::vector<int>(
      chain.group_sizes.data(), chain.group_sizes.data() + chain.J);
  meta["group_keys"] = group_keys;
  meta["iterations"] = chain.iterations;
  meta["burn_in"] = chain.burn_in;
  meta["thinning"] = chain.thinning;
  meta["columns"] = names;
  meta["alpha_present"] = chain.alpha_draws.size() > 0;
  std::ofstream meta_out(prefix + ".meta.json");
  if (!meta_out)
    throw std::runtime_error("cannot write chain metadata: " + prefix +
                             ".meta.json");
  meta_out << meta.dump(2) << "\n";
}

LoadedChain load_chain(const std::string& prefix) {
  std::ifstream meta_in(prefix + ".meta.json");
  if (!meta_in)
    throw std::runtime_error("cannot open chain metadata: " + prefix +
                             ".meta.json");
  const json meta = json::parse(meta_in);

  LoadedChain loaded;
  loaded.fisan = meta.at("model") == "fisan";
  loaded.group_keys = meta.at("group_keys").get<std::vector<std::string>>();
  ChainStore& chain = loaded.chain;
  chain.J = meta.at("J").get<int>();
  chain.L = meta.at("L").get<int>();
  chain.d = meta.at("d").get<int>();
  const std::vector<int> sizes = meta.at("group_sizes").get<std::vector<int>>();
  chain.group_sizes = Eigen::Map<const Eigen::VectorXi>(
      sizes.data(), static_cast<Eigen::Index>(sizes.size()));
  chain.iterations = meta.at("iterations").get<long>();
  chain.burn_in = meta.at("burn_in").get<long>();
  chain.thinning = meta.at("thinning").get<long>();

  std::ifstream in(prefix + ".bin", std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open chain file: " + prefix + ".bin");
  char magic[8];
  in.read(magic, 8);
  if (std::string(magic, 8) != std::string(kChainMagic, 8))
    throw std::runtime_error("bad chain file magic in " + prefix + ".bin");
  const std::uint64_t n_columns = read_u64(in);
  const std::uint64_t n_draws = read_u64(in);
  const std::uint64_t n_loglik = read_u64(in);
  std::vector<std::string> names(n_columns);
  for (auto& name : names) {
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    name.resize(len);
    in.read(name.data(), len);
  }
  std::vector<std::vector<double>> columns(n_columns,
                                           std::vector<double>(n_draws));
  for (auto& col : columns)
    in.read(reinterpret_cast<char*>(col.data()),
            static_cast<std::streamsize>(n_draws * sizeof(double)));
  chain.loglik.resize(n_loglik);
  in.read(reinterpret_cast<char*>(chain.loglik.data()),
          static_cast<std::streamsize>(n_loglik * sizeof(double)));
  if (!in) throw std::runtime_error("truncated chain file: " + prefix + ".bin");

  const int t = static_cast<int>(n_draws);
  const int n_obs = chain.group_sizes.sum();
  chain.s_draws.resize(t, chain.J);
  chain.m_draws.resize(t, n_obs);
  if (meta.at("alpha_present").get<bool>()) chain.alpha_draws.resize(t);
  chain.group_weights.assign(t, MatrixXd::Zero(chain.J, chain.L));
  chain.atom_means.assign(t, MatrixXd::Zero(chain.L, chain.d));
  chain.atom_precs.assign(
      t, std::vector<MatrixXd>(chain.L, MatrixXd::Zero(chain.d, chain.d)));

  for (std::uint64_t ci = 0; ci < n_columns; ++ci) {
    const std::string& name = names[ci];
    const std::vector<double>& col = columns[ci];
    int a = 0, b = 0, c = 0;
    if (std::sscanf(name.c_str(), "s_%d", &a) == 1 &&
        name.rfind("s_", 0) == 0) {
      for (int row = 0; row < t; ++row)
        chain.s_draws(row, a) = static_cast<int>(col[row]);
    } else if (std::sscanf(name.c_str(), "m_%d", &a) == 1 &&
               name.rfind("m_", 0) == 0) {
      for (int row = 0; row < t; ++row)
        chain.m_draws(row, a) = static_cast<int>(col[row]);
    } else if (name == "alpha") {
      for (int row = 0; row < t; ++row) chain.alpha_draws[row] = col[row];
    } else if (std::sscanf(name.c_str(), "w_%d_%d", &a, &b) == 2) {
      for (int row = 0; row < t; ++row)
        chain.group_weights[row](a, b) = col[row];
    } else if (std::sscanf(name.c_str(), "mu_%d_%d", &a, &b) == 2) {
      for (int row = 0; row < t; ++row) chain.atom_means[row](a, b) = col[row];
    } else if (std::sscanf(name.c_str(), "prec_%d_%d_%d", &a, &b, &c) == 3) {
      for (int row = 0; row < t; ++row) {
        chain.atom_precs[row][a](b, c) = col[row];
        chain.atom_precs[row][a](c, b) = col[row];
      }
    } else {
      throw std::runtime_error("unknown chain column: " + name);
    }
  }
  return loaded;
}

}  // namespace sanmix
