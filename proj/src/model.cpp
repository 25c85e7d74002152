#include "pret/model.hpp"

#include "pret/stat_kernels.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace pret {

void LatentModelParams::validate() const {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  if (!(sigma_zeta > 0.0))
    throw std::invalid_argument("sigma_zeta must be positive");
  if (!theta.allFinite() || !std::isfinite(rho))
    throw std::invalid_argument("non-finite parameter");
}

void Sample::validate() const {
  if (n < 1 || s.size() != n || price.size() != n || x.rows() != n ||
      z.rows() != n)
    throw std::invalid_argument("inconsistent sample dimensions");
  if (!s.allFinite() || !price.allFinite() || !x.allFinite() || !z.allFinite())
    throw std::invalid_argument("non-finite sample entries");
  for (int i = 0; i < n; ++i)
    if (s(i) != 0.0 && s(i) != 1.0)
      throw std::invalid_argument("choice column must be binary");
  if (m() < k()) throw std::invalid_argument("X must be a subset of Z");
  for (int j = 0; j < k(); ++j)
    if ((x.col(j) - z.col(j)).cwiseAbs().maxCoeff() > 0.0)
      throw std::invalid_argument("leading Z columns must equal X");
  if (n < m() + 1) throw std::invalid_argument("too few rows");
  if (hidden) {
    const auto& h = *hidden;
    if (h.u.size() != n || h.nu.size() != n || h.eps.size() != n ||
        h.pi.size() != n)
      throw std::invalid_argument("hidden block size mismatch");
    for (int i = 0; i < n; ++i)
      if ((s(i) == 1.0) != (h.pi(i) >= 0.0))
        throw std::invalid_argument("choice inconsistent with latent sign");
  }
}

Sample Sample::observed() const {
  Sample out = *this;
  out.hidden.reset();
  return out;
}

double latent_index(const LatentModelParams& params, const Sample& sample,
                    int row, std::optional<double> include_u) {
  if (row < 0 || row >= sample.n) throw std::out_of_range("row out of range");
  double v = sample.x.row(row).dot(params.theta) - sample.price(row);
  if (include_u) v += *include_u * params.rho;
  return v;
}

double selection_probability(const LatentModelParams& params,
                             const Sample& sample, int row,
                             std::optional<double> include_u) {
  params.validate();
  const double idx = latent_index(params, sample, row, include_u);
  const double scale = include_u ? params.sigma_zeta : params.sigma;
  return normal_cdf(idx / scale);
}

namespace {

std::string hidden_path_for(const std::string& path) {
  std::filesystem::path p(path);
  auto stem = p.stem().string();
  return (p.parent_path() / (stem + ".hidden.csv")).string();
}

void write_row(std::ofstream& os, const std::vector<double>& vals) {
  for (size_t j = 0; j < vals.size(); ++j) {
    if (j) os << ',';
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", vals[j]);
    os << buf;
  }
  os << '\n';
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

void write_sample_csv(const Sample& sample, const std::string& path) {
  sample.validate();
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "s,price";
  for (int j = 0; j < sample.k(); ++j) os << ",x_" << j + 1;
  for (int j = 0; j < sample.m(); ++j) os << ",z_" << j + 1;
  os << '\n';
  std::vector<double> row;
  for (int i = 0; i < sample.n; ++i) {
    row.clear();
    row.push_back(sample.s(i));
    row.push_back(sample.price(i));
    for (int j = 0; j < sample.k(); ++j) row.push_back(sample.x(i, j));
    for (int j = 0; j < sample.m(); ++j) row.push_back(sample.z(i, j));
    write_row(os, row);
  }
  if (sample.hidden) {
    std::ofstream hs(hidden_path_for(path));
    if (!hs) throw std::runtime_error("cannot open hidden csv for " + path);
    hs << "u,nu,eps,pi\n";
    const auto& h = *sample.hidden;
    for (int i = 0; i < sample.n; ++i)
      write_row(hs, {h.u(i), h.nu(i), h.eps(i), h.pi(i)});
  }
}

Sample read_sample_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty csv");
  auto header = split_line(line);
  int k = 0, m = 0;
  for (const auto& h : header) {
    if (h.rfind("x_", 0) == 0) ++k;
    if (h.rfind("z_", 0) == 0) ++m;
  }
  if (header.size() != static_cast<size_t>(2 + k + m) || header[0] != "s" ||
      header[1] != "price")
    throw std::runtime_error("unexpected csv header in " + path);
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != header.size())
      throw std::runtime_error("ragged csv row in " + path);
    std::vector<double> vals(cells.size());
    for (size_t j = 0; j < cells.size(); ++j) vals[j] = std::stod(cells[j]);
    rows.push_back(std::move(vals));
  }
  Sample out;
  out.n = static_cast<int>(rows.size());
  out.s.resize(out.n);
  out.price.resize(out.n);
  out.x.resize(out.n, k);
  out.z.resize(out.n, m);
  for (int i = 0; i < out.n; ++i) {
    out.s(i) = rows[i][0];
    out.price(i) = rows[i][1];
    for (int j = 0; j < k; ++j) out.x(i, j) = rows[i][2 + j];
    for (int j = 0; j < m; ++j) out.z(i, j) = rows[i][2 + k + j];
  }
  const auto hpath = hidden_path_for(path);
  if (std::filesystem::exists(hpath)) {
    std::ifstream hs(hpath);
    std::getline(hs, line);  // header
    HiddenBlock h;
    h.u.resize(out.n);
    h.nu.resize(out.n);
    h.eps.resize(out.n);
    h.pi.resize(out.n);
    for (int i = 0; i < out.n; ++i) {
      if (!std::getline(hs, line))
        throw std::runtime_error("hidden csv truncated: " + hpath);
      auto cells = split_line(line);
      if (cells.size() != 4)
        throw std::runtime_error("bad hidden csv row in " + hpath);
      h.u(i) = std::stod(cells[0]);
      h.nu(i) = std::stod(cells[1]);
      h.eps(i) = std::stod(cells[2]);
      h.pi(i) = std::stod(cells[3]);
    }
    out.hidden = std::move(h);
  }
  out.validate();
  return out;
}

}  // namespace pret
