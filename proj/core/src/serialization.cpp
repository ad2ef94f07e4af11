#include "pcapce/serialization.hpp"

#include <cmath>
#include <limits>

#include "pcapce/error.hpp"

namespace pcapce {
namespace {

using nlohmann::json;

json vector_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vector_from(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::SchemaInvalid, "expected a numeric array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

double double_or_inf(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaInvalid, std::string(what) + ": " + e.what());
  }
}

}  // namespace

json number_or_null(double v) {
  return std::isfinite(v) ? json(v) : json(nullptr);
}

json to_json(const PriorSpec& prior) {
  json a = json::array();
  for (const auto& e : prior.entries()) {
    const auto& u = std::get<Uniform>(e.distribution);
    a.push_back({{"name", e.name}, {"distribution", "uniform"}, {"lo", u.lo}, {"hi", u.hi}});
  }
  return a;
}

PriorSpec prior_from_json(const json& j) {
  return guarded("prior", [&] {
    std::vector<PriorEntry> entries;
    for (const auto& e : j) {
      if (e.at("distribution").get<std::string>() != "uniform") {
        throw Error(ErrorCode::SchemaInvalid, "unsupported distribution");
      }
      entries.push_back({e.at("name").get<std::string>(),
                         Uniform{e.at("lo").get<double>(), e.at("hi").get<double>()}});
    }
    try {
      return PriorSpec(std::move(entries));
    } catch (const Error& err) {
      throw Error(ErrorCode::SchemaInvalid, err.what());
    }
  });
}

json to_json(const PcaBasis& basis) {
  json vectors = json::array();
  for (Eigen::Index r = 0; r < basis.n_output(); ++r) {
    for (Eigen::Index c = 0; c < basis.retained; ++c) vectors.push_back(basis.eigenvectors(r, c));
  }
  return {{"n_output", basis.n_output()},
          {"n_retained", basis.retained},
          {"mean", vector_json(basis.mean)},
          {"eigenvalues", vector_json(basis.eigenvalues)},
          {"eigenvectors", std::move(vectors)}};
}

PcaBasis pca_from_json(const json& j) {
  return guarded("pca", [&] {
    PcaBasis b;
    const auto n = j.at("n_output").get<Eigen::Index>();
    const auto r = j.at("n_retained").get<Eigen::Index>();
    b.mean = vector_from(j.at("mean"));
    b.eigenvalues = vector_from(j.at("eigenvalues"));
    const Vector flat = vector_from(j.at("eigenvectors"));
    if (n < 1 || r < 1 || r > n || b.mean.size() != n || b.eigenvalues.size() != n ||
        flat.size() != n * r) {
      throw Error(ErrorCode::SchemaInvalid, "pca: inconsistent sizes");
    }
    b.eigenvectors.resize(n, r);
    for (Eigen::Index row = 0; row < n; ++row) {
      for (Eigen::Index c = 0; c < r; ++c) b.eigenvectors(row, c) = flat[row * r + c];
    }
    b.retained = r;
    return b;
  });
}

json to_json(const PceModel& model) {
  json indices = json::array();
  for (const auto& a : model.index_set.indices) indices.push_back(a);
  json active = json::array();
  for (bool v : model.active) active.push_back(v);
  return {{"degree", model.index_set.max_degree},
          {"q_norm", model.index_set.q_norm},
          {"indices", std::move(indices)},
          {"coefficients", vector_json(model.coefficients)},
          {"active", std::move(active)},
          {"loo_error", number_or_null(model.loo_error)}};
}

PceModel pce_from_json(const json& j, const PriorSpec& prior) {
  return guarded("component", [&] {
    PceModel m;
    m.input_spec = prior;
    m.index_set.dimension = prior.dimension();
    m.index_set.max_degree = j.at("degree").get<int>();
    m.index_set.q_norm = j.at("q_norm").get<double>();
    for (const auto& a : j.at("indices")) {
      MultiIndex idx = a.get<MultiIndex>();
      if (idx.size() != prior.dimension()) throw Error(ErrorCode::SchemaInvalid, "index dimension");
      for (int v : idx) {
        if (v < 0 || v > m.index_set.max_degree) {
          throw Error(ErrorCode::SchemaInvalid, "index entry exceeds degree");
        }
      }
      m.index_set.indices.push_back(std::move(idx));
    }
    m.coefficients = vector_from(j.at("coefficients"));
    m.active = j.at("active").get<std::vector<bool>>();
    m.loo_error = double_or_inf(j.at("loo_error"));
    if (static_cast<std::size_t>(m.coefficients.size()) != m.index_set.size() ||
        m.active.size() != m.index_set.size()) {
      throw Error(ErrorCode::SchemaInvalid, "component: coefficient count mismatch");
    }
    return m;
  });
}

json to_json(const PcaPceSurrogate& s) {
  json components = json::array();
  for (const auto& c : s.components) components.push_back(to_json(c));
  return {{"format_version", s.format_version},
          {"mode", std::string(to_string(s.mode))},
          {"prior", to_json(s.prior)},
          {"pca", s.basis ? to_json(*s.basis) : json(nullptr)},
          {"components", std::move(components)},
          {"training_meta",
           {{"training_K", s.meta.training_K},
            {"epsilon_dr", s.meta.epsilon_dr},
            {"explained_variance", number_or_null(s.meta.explained_variance)},
            {"pca_error", number_or_null(s.meta.pca_error)},
            {"surrogate_error", number_or_null(s.meta.surrogate_error)}}}};
}

PcaPceSurrogate surrogate_from_json(const json& j) {
  if (!j.is_object() || !j.contains("format_version")) {
    throw Error(ErrorCode::SchemaInvalid, "surrogate: missing format_version");
  }
  const int version = guarded("format_version", [&] { return j.at("format_version").get<int>(); });
  if (version != kSurrogateFormatVersion) {
    throw Error(ErrorCode::VersionMismatch,
                "surrogate format_version " + std::to_string(version) + " is not supported");
  }
  return guarded("surrogate", [&] {
    PcaPceSurrogate s;
    s.format_version = version;
    try {
      s.mode = surrogate_mode_from_string(j.at("mode").get<std::string>());
    } catch (const Error& e) {
      throw Error(ErrorCode::SchemaInvalid, e.what());
    }
    s.prior = prior_from_json(j.at("prior"));
    if (!j.at("pca").is_null()) s.basis = pca_from_json(j.at("pca"));
    for (const auto& c : j.at("components")) s.components.push_back(pce_from_json(c, s.prior));
    const auto& meta = j.at("training_meta");
    s.meta.training_K = meta.at("training_K").get<std::size_t>();
    s.meta.epsilon_dr = meta.at("epsilon_dr").get<double>();
    s.meta.explained_variance = double_or_inf(meta.at("explained_variance"));
    s.meta.pca_error = double_or_inf(meta.at("pca_error"));
    s.meta.surrogate_error = double_or_inf(meta.at("surrogate_error"));

    const bool reduced = s.mode == SurrogateMode::PcaPce;
    if (reduced != s.basis.has_value()) throw Error(ErrorCode::SchemaInvalid, "mode/pca mismatch");
    if (reduced && static_cast<Eigen::Index>(s.components.size()) != s.basis->retained) {
      throw Error(ErrorCode::SchemaInvalid, "component count differs from n_retained");
    }
    if (s.components.empty()) throw Error(ErrorCode::SchemaInvalid, "no components");
    return s;
  });
}

}  // namespace pcapce
