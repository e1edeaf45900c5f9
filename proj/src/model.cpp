#include "hiercast/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hiercast/autodiff.hpp"
#include "hiercast/io.hpp"
#include "hiercast/reconcile.hpp"
#include "hiercast/arrange.hpp"

namespace hiercast {

std::string to_string(KlMode mode) {
  return mode == KlMode::ClosedForm ? "closed" : "sampled";
}

KlMode kl_mode_from_string(const std::string& name) {
  if (name == "closed") return KlMode::ClosedForm;
  if (name == "sampled") return KlMode::Sampled;
  throw LossError("unknown kl mode '" + name + "'");
}

std::size_t kl_noise_size(const HierarchySpec& hierarchy, int n_kl, int steps) {
  std::size_t total = 0;
  for (int i : hierarchy.internal_indices())
    total += (1 + hierarchy.children_of(i).size()) *
             static_cast<std::size_t>(n_kl);
  return total * static_cast<std::size_t>(steps);
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ModelError("config: " + what); };
  if (hidden < 10 || hidden > 30) fail("hidden width must be in [10, 30]");
  if (layers < 2 || layers > 5) fail("layer count must be in [2, 5]");
  if (dropout < 0.1 || dropout > 0.2) fail("dropout must be in [0.1, 0.2]");
  if (epochs < 20 || epochs > 60) fail("epochs must be in [20, 60]");
  if (!std::isfinite(lambda) || lambda < 0.0)
    fail("lambda must be finite and non-negative");
  if (!std::isfinite(learning_rate) || learning_rate <= 0.0)
    fail("learning rate must be positive");
  if (batch_multiplier < 1) fail("batch multiplier must be >= 1");
  if (windows_per_epoch < 1) fail("windows per epoch must be >= 1");
  if (context < 1) fail("context length must be >= 1");
  if (horizon < 1) fail("horizon must be >= 1");
  if (kl_mode == KlMode::Sampled && kl_samples < 2)
    fail("sampled kl needs at least 2 draws");
  if (embedding_dim < 0) fail("embedding dimension must be >= 0");
  if (!std::isfinite(grad_clip) || grad_clip <= 0.0)
    fail("gradient clip must be positive");
  if (seasonal_period < 0) fail("seasonal period must be >= 0");
}

namespace {

// Flat parameter layout. Per layer: W_z (H x D, row major), U_z (H x H),
// b_z (H), then the same three for the candidate gate. After the layers:
// head w_mu (H), b_mu, w_sigma (H), b_sigma; then the node embeddings
// (n x E, row major).
struct NetDims {
  int n = 0, hidden = 0, layers = 0, embedding = 0;
  bool seasonal = false;

  int input_dim(int layer) const {
    return layer == 0 ? 1 + (seasonal ? 2 : 0) + embedding : hidden;
  }
  int layer_size(int layer) const {
    return 2 * (hidden * input_dim(layer) + hidden * hidden + hidden);
  }
  int layer_offset(int layer) const {
    int off = 0;
    for (int l = 0; l < layer; ++l) off += layer_size(l);
    return off;
  }
  int head_offset() const { return layer_offset(layers); }
  int embedding_offset() const { return head_offset() + 2 * hidden + 2; }
  int total() const { return embedding_offset() + n * embedding; }

  static NetDims from(int n_nodes, const TrainConfig& cfg) {
    NetDims d;
    d.n = n_nodes;
    d.hidden = cfg.hidden;
    d.layers = cfg.layers;
    d.embedding = cfg.embedding_dim;
    d.seasonal = cfg.seasonal_period > 0;
    return d;
  }
};

// One recurrent step for one node. state holds the per-layer hidden vectors
// and starts empty (treated as zeros). When mask is set, one multiplier per
// input coordinate is consumed per layer, advancing *mask_cursor.
template <typename T>
GaussianParam<T> net_step(const std::vector<T>& params, const NetDims& dims,
                          int node, double lag, double cov_sin, double cov_cos,
                          std::vector<std::vector<T>>& state,
                          const std::vector<double>* mask,
                          std::size_t* mask_cursor) {
  const int H = dims.hidden;
  const bool fresh = state.empty();
  if (fresh) state.resize(static_cast<std::size_t>(dims.layers));

  std::vector<T> below;  // masked output of the previous layer
  for (int l = 0; l < dims.layers; ++l) {
    const int D = dims.input_dim(l);
    const int base = dims.layer_offset(l);
    const int wz = base, uz = base + H * D, bz = uz + H * H;
    const int wc = bz + H, uc = wc + H * D, bc = uc + H * H;

    double m_lag = 1.0, m_sin = 1.0, m_cos = 1.0;
    std::vector<double> m(static_cast<std::size_t>(D), 1.0);
    if (mask) {
      for (int k = 0; k < D; ++k)
        m[static_cast<std::size_t>(k)] = (*mask)[(*mask_cursor)++];
      if (l == 0) {
        m_lag = m[0];
        if (dims.seasonal) {
          m_sin = m[1];
          m_cos = m[2];
        }
      }
    }

    if (l > 0) {
      if (mask)
        for (int k = 0; k < H; ++k)
          below[static_cast<std::size_t>(k)] =
              below[static_cast<std::size_t>(k)] *
              m[static_cast<std::size_t>(k)];
    }

    auto& h_prev = state[static_cast<std::size_t>(l)];
    auto gate = [&](int w_off, int u_off, int b_off, int j) {
      T acc = params[static_cast<std::size_t>(b_off + j)];
      const int row = w_off + j * D;
      if (l == 0) {
        acc = acc + params[static_cast<std::size_t>(row)] * (lag * m_lag);
        int col = 1;
        if (dims.seasonal) {
          acc = acc + params[static_cast<std::size_t>(row + 1)] *
                          (cov_sin * m_sin);
          acc = acc + params[static_cast<std::size_t>(row + 2)] *
                          (cov_cos * m_cos);
          col = 3;
        }
        const int emb = dims.embedding_offset() + node * dims.embedding;
        for (int e = 0; e < dims.embedding; ++e) {
          T x = params[static_cast<std::size_t>(emb + e)];
          if (mask) x = x * m[static_cast<std::size_t>(col + e)];
          acc = acc + params[static_cast<std::size_t>(row + col + e)] * x;
        }
      } else {
        for (int k = 0; k < D; ++k)
          acc = acc + params[static_cast<std::size_t>(row + k)] *
                          below[static_cast<std::size_t>(k)];
      }
      if (!fresh)
        for (int k = 0; k < H; ++k)
          acc = acc + params[static_cast<std::size_t>(u_off + j * H + k)] *
                          h_prev[static_cast<std::size_t>(k)];
      return acc;
    };

    std::vector<T> h_new(static_cast<std::size_t>(H));
    for (int j = 0; j < H; ++j) {
      T z = sigmoid(gate(wz, uz, bz, j));
      T c = tanh(gate(wc, uc, bc, j));
      h_new[static_cast<std::size_t>(j)] =
          fresh ? (1.0 - z) * c
                : z * h_prev[static_cast<std::size_t>(j)] + (1.0 - z) * c;
    }
    below = h_new;
    state[static_cast<std::size_t>(l)] = std::move(h_new);
  }

  const int head = dims.head_offset();
  const auto& top = state[static_cast<std::size_t>(dims.layers - 1)];
  T mu = params[static_cast<std::size_t>(head + H)];
  T sraw = params[static_cast<std::size_t>(head + 2 * H + 1)];
  for (int k = 0; k < H; ++k) {
    mu = mu + params[static_cast<std::size_t>(head + k)] *
                  top[static_cast<std::size_t>(k)];
    sraw = sraw + params[static_cast<std::size_t>(head + H + 1 + k)] *
                      top[static_cast<std::size_t>(k)];
  }
  return {mu, softplus(sraw) + 1e-6};
}

std::pair<double, double> seasonal_covariates(int t, int period) {
  if (period <= 0) return {0.0, 0.0};
  const double phase =
      2.0 * std::numbers::pi * static_cast<double>(t) / period;
  return {std::sin(phase), std::cos(phase)};
}

// Loss of a batch of training windows, shared by the tape and double paths.
template <typename T>
T batch_loss_t(const HierarchySpec& hierarchy, const Eigen::MatrixXd& scaled,
               const Eigen::VectorXd& node_scale, const TrainConfig& cfg,
               const std::vector<int>& starts,
               const std::vector<double>& kl_noise,
               const std::vector<T>& params,
               const std::vector<double>* dropout_mask) {
  const NetDims dims = NetDims::from(hierarchy.node_count(), cfg);
  const int n = hierarchy.node_count();
  const int span = cfg.context + cfg.horizon;
  const std::size_t noise_per_window =
      cfg.kl_mode == KlMode::Sampled && cfg.lambda > 0.0
          ? kl_noise_size(hierarchy, cfg.kl_samples, cfg.horizon)
          : 0;

  std::size_t mask_cursor = 0;
  T batch{};
  bool first_window = true;
  for (std::size_t w = 0; w < starts.size(); ++w) {
    const int s = starts[w];
    std::vector<std::vector<GaussianParam<T>>> outputs(
        static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      std::vector<std::vector<T>> state;
      auto& out = outputs[static_cast<std::size_t>(i)];
      out.reserve(static_cast<std::size_t>(cfg.horizon));
      for (int t = s + 1; t < s + span; ++t) {
        const auto [cs, cc] = seasonal_covariates(t, cfg.seasonal_period);
        GaussianParam<T> p =
            net_step(params, dims, i, scaled(i, t - 1), cs, cc, state,
                     dropout_mask, &mask_cursor);
        if (t >= s + cfg.context) out.push_back(std::move(p));
      }
    }
    const Eigen::MatrixXd y = scaled.middleCols(s + cfg.context, cfg.horizon);
    std::vector<double> window_noise;
    if (noise_per_window > 0)
      window_noise.assign(
          kl_noise.begin() + static_cast<std::ptrdiff_t>(w * noise_per_window),
          kl_noise.begin() +
              static_cast<std::ptrdiff_t>((w + 1) * noise_per_window));
    T loss = total_loss(outputs, y, hierarchy, node_scale, cfg.lambda,
                        cfg.kl_mode, cfg.kl_samples, window_noise);
    batch = first_window ? loss : batch + loss;
    first_window = false;
  }
  return batch / static_cast<double>(starts.size());
}

HierarchySpec parse_edge_list(const std::string& edges) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::istringstream in(edges);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ModelError("bad hierarchy line '" + line + "'");
    pairs.emplace_back(line.substr(0, comma), line.substr(comma + 1));
  }
  return HierarchySpec::from_edges(pairs);
}

}  // namespace

namespace detail {

int parameter_count(int n_nodes, const TrainConfig& config) {
  return NetDims::from(n_nodes, config).total();
}

std::vector<double> init_parameters(int n_nodes, const TrainConfig& config,
                                    Rng& rng) {
  const NetDims dims = NetDims::from(n_nodes, config);
  std::vector<double> params(static_cast<std::size_t>(dims.total()), 0.0);
  auto fill = [&](int offset, int count, double range) {
    for (int k = 0; k < count; ++k)
      params[static_cast<std::size_t>(offset + k)] =
          range * (2.0 * rng.uniform() - 1.0);
  };
  const int H = dims.hidden;
  for (int l = 0; l < dims.layers; ++l) {
    const int D = dims.input_dim(l);
    const int base = dims.layer_offset(l);
    const double rw = 1.0 / std::sqrt(static_cast<double>(D));
    const double ru = 1.0 / std::sqrt(static_cast<double>(H));
    fill(base, H * D, rw);                      // W_z
    fill(base + H * D, H * H, ru);              // U_z
    fill(base + H * D + H * H + H, H * D, rw);  // W_c
    fill(base + 2 * H * D + H * H + H, H * H, ru);  // U_c
  }
  const int head = dims.head_offset();
  fill(head, H, 1.0 / std::sqrt(static_cast<double>(H)));
  fill(head + H + 1, H, 1.0 / std::sqrt(static_cast<double>(H)));
  fill(dims.embedding_offset(), dims.n * dims.embedding, 0.1);
  return params;
}

std::size_t dropout_mask_size(int n_nodes, const TrainConfig& config,
                              int n_windows) {
  const NetDims dims = NetDims::from(n_nodes, config);
  int per_step = 0;
  for (int l = 0; l < dims.layers; ++l) per_step += dims.input_dim(l);
  return static_cast<std::size_t>(n_windows) *
         static_cast<std::size_t>(n_nodes) *
         static_cast<std::size_t>(config.context + config.horizon - 1) *
         static_cast<std::size_t>(per_step);
}

double batch_loss(const HierarchySpec& hierarchy, const Eigen::MatrixXd& scaled,
                  const Eigen::VectorXd& node_scale, const TrainConfig& config,
                  const std::vector<int>& window_starts,
                  const std::vector<double>& kl_noise,
                  const std::vector<double>& params,
                  const std::vector<double>* dropout_mask,
                  std::vector<double>* grad) {
  if (!grad)
    return batch_loss_t(hierarchy, scaled, node_scale, config, window_starts,
                        kl_noise, params, dropout_mask);

  Tape tape;
  tape.reserve(params.size() +
               static_cast<std::size_t>(window_starts.size()) *
                   static_cast<std::size_t>(hierarchy.node_count()) *
                   static_cast<std::size_t>(config.context + config.horizon) *
                   static_cast<std::size_t>(
                       config.layers * (4 * config.hidden * config.hidden +
                                        12 * config.hidden)));
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (double p : params) vars.emplace_back(tape, p);
  Var loss = batch_loss_t(hierarchy, scaled, node_scale, config, window_starts,
                          kl_noise, vars, dropout_mask);
  backward(loss);
  grad->resize(params.size());
  for (std::size_t k = 0; k < vars.size(); ++k)
    (*grad)[k] = vars[k].adjoint();
  return loss.value();
}

}  // namespace detail

HierarchySpec TrainedModel::hierarchy() const {
  return parse_edge_list(hierarchy_edges);
}

TrainedModel train(const SeriesPanel& panel, const HierarchySpec& hierarchy,
                   const TrainConfig& config) {
  config.validate();
  const int n = hierarchy.node_count();
  if (panel.node_count() != n || panel.node_ids != hierarchy.nodes())
    throw ModelError("panel nodes do not match the hierarchy");
  const int T = panel.length();
  const int span = config.context + config.horizon;
  if (T < span)
    throw ModelError("panel too short: need at least " + std::to_string(span) +
                     " steps for context plus horizon, got " +
                     std::to_string(T));

  SplitConfig whole;
  whole.history_end = T;
  whole.horizon = 0;
  auto [scaled_panel, stats] = scale_panel(panel, whole);
  const Eigen::MatrixXd& scaled = scaled_panel.values;
  Eigen::VectorXd node_scale(n);
  for (int i = 0; i < n; ++i) node_scale[i] = stats.scale[static_cast<std::size_t>(i)];

  Rng root(mix_seed(config.seed));
  Rng init_rng = root.fork(1);
  const Rng sampling = root.fork(2);
  const Rng dropout_rng = root.fork(3);
  const Rng noise_rng = root.fork(4);

  std::vector<double> params = detail::init_parameters(n, config, init_rng);
  std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0);
  std::vector<double> grad;
  long adam_step = 0;

  const int max_start = T - span;
  const std::size_t noise_per_window =
      config.kl_mode == KlMode::Sampled && config.lambda > 0.0
          ? kl_noise_size(hierarchy, config.kl_samples, config.horizon)
          : 0;

  std::vector<double> loss_trace;
  loss_trace.reserve(static_cast<std::size_t>(config.epochs));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng ep_sample = sampling.fork(static_cast<std::uint64_t>(epoch));
    Rng ep_dropout = dropout_rng.fork(static_cast<std::uint64_t>(epoch));
    Rng ep_noise = noise_rng.fork(static_cast<std::uint64_t>(epoch));

    std::vector<int> starts(static_cast<std::size_t>(config.windows_per_epoch));
    for (auto& s : starts)
      s = static_cast<int>(
          ep_sample.integer(static_cast<std::uint64_t>(max_start) + 1));

    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t at = 0; at < starts.size();
         at += static_cast<std::size_t>(config.batch_multiplier)) {
      const std::size_t end = std::min(
          starts.size(), at + static_cast<std::size_t>(config.batch_multiplier));
      const std::vector<int> batch_starts(starts.begin() + static_cast<std::ptrdiff_t>(at),
                                          starts.begin() + static_cast<std::ptrdiff_t>(end));

      std::vector<double> mask(detail::dropout_mask_size(
          n, config, static_cast<int>(batch_starts.size())));
      const double keep = 1.0 - config.dropout;
      for (auto& mk : mask)
        mk = ep_dropout.uniform() < keep ? 1.0 / keep : 0.0;

      std::vector<double> kl_noise(noise_per_window * batch_starts.size());
      for (auto& z : kl_noise) z = ep_noise.normal();

      const double loss =
          detail::batch_loss(hierarchy, scaled, node_scale, config,
                             batch_starts, kl_noise, params, &mask, &grad);
      if (!std::isfinite(loss))
        throw ModelError("training diverged (non-finite loss) at epoch " +
                         std::to_string(epoch));

      double norm_sq = 0.0;
      for (double g : grad) norm_sq += g * g;
      const double norm = std::sqrt(norm_sq);
      if (norm > config.grad_clip)
        for (double& g : grad) g *= config.grad_clip / norm;

      ++adam_step;
      const double b1 = 0.9, b2 = 0.999;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam_step));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam_step));
      for (std::size_t k = 0; k < params.size(); ++k) {
        m[k] = b1 * m[k] + (1.0 - b1) * grad[k];
        v[k] = b2 * v[k] + (1.0 - b2) * grad[k] * grad[k];
        params[k] -= config.learning_rate * (m[k] / c1) /
                     (std::sqrt(v[k] / c2) + 1e-8);
      }
      epoch_loss += loss;
      ++batches;
    }
    loss_trace.push_back(epoch_loss / batches);
  }

  TrainedModel model;
  model.config = config;
  model.node_ids = hierarchy.nodes();
  model.hierarchy_edges = hierarchy.to_edge_list();
  model.scale = node_scale;
  model.weights = std::move(params);
  model.loss_trace = std::move(loss_trace);
  return model;
}

ForecastResult forecast(const TrainedModel& model, const SeriesPanel& panel,
                        int horizon, int n_samples, std::uint64_t seed) {
  if (horizon < 0) throw ModelError("negative horizon");
  const int n = static_cast<int>(model.node_ids.size());
  if (panel.node_count() != n || panel.node_ids != model.node_ids)
    throw ModelError("panel nodes do not match the model");
  const int T = panel.length();
  if (T < 1) throw ModelError("empty conditioning panel");

  ForecastResult result;
  result.gaussian.mu.resize(n, horizon);
  result.gaussian.sigma.resize(n, horizon);
  result.samples.sample_count = n_samples;
  result.samples.seed = seed;
  if (horizon == 0) return result;

  const NetDims dims = NetDims::from(n, model.config);
  if (static_cast<int>(model.weights.size()) != dims.total())
    throw ModelError("weight vector does not match the configuration");

  Eigen::MatrixXd scaled = panel.values;
  for (int i = 0; i < n; ++i) scaled.row(i) /= model.scale[i];

  for (int i = 0; i < n; ++i) {
    std::vector<std::vector<double>> state;
    for (int t = 1; t < T; ++t) {
      const auto [cs, cc] =
          seasonal_covariates(t, model.config.seasonal_period);
      net_step(model.weights, dims, i, scaled(i, t - 1), cs, cc, state,
               nullptr, nullptr);
    }
    double lag = scaled(i, T - 1);
    for (int k = 0; k < horizon; ++k) {
      const auto [cs, cc] =
          seasonal_covariates(T + k, model.config.seasonal_period);
      const GaussianParam<double> p =
          net_step(model.weights, dims, i, lag, cs, cc, state, nullptr,
                   nullptr);
      lag = p.mu;  // feed the predictive mean forward
      result.gaussian.mu(i, k) = p.mu * model.scale[i];
      result.gaussian.sigma(i, k) = p.sigma * model.scale[i];
    }
  }

  result.samples = draw_marginal_samples(result.gaussian, n_samples, seed);
  return result;
}

SampleForecast harden_bottom_up(const SampleForecast& samples,
                                const SummingMatrix& S) {
  return reconcile_samples(build_bu(S), S, samples);
}

void save_model(const TrainedModel& model, const std::string& path) {
  nlohmann::json j;
  const TrainConfig& c = model.config;
  j["config"] = {{"hidden", c.hidden},
                 {"layers", c.layers},
                 {"dropout", c.dropout},
                 {"epochs", c.epochs},
                 {"lambda", c.lambda},
                 {"learning_rate", c.learning_rate},
                 {"batch_multiplier", c.batch_multiplier},
                 {"windows_per_epoch", c.windows_per_epoch},
                 {"context", c.context},
                 {"horizon", c.horizon},
                 {"seed", c.seed},
                 {"kl_mode", to_string(c.kl_mode)},
                 {"kl_samples", c.kl_samples},
                 {"embedding_dim", c.embedding_dim},
                 {"grad_clip", c.grad_clip},
                 {"seasonal_period", c.seasonal_period}};
  j["node_ids"] = model.node_ids;
  j["hierarchy_edges"] = model.hierarchy_edges;
  j["scale"] = std::vector<double>(model.scale.data(),
                                   model.scale.data() + model.scale.size());
  j["weights"] = model.weights;
  j["loss_trace"] = model.loss_trace;
  write_text_file(path, j.dump(2) + "\n");
}

TrainedModel load_model(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ModelError("cannot parse model file '" + path + "': " + e.what());
  }
  TrainedModel model;
  try {
    const auto& c = j.at("config");
    model.config.hidden = c.at("hidden").get<int>();
    model.config.layers = c.at("layers").get<int>();
    model.config.dropout = c.at("dropout").get<double>();
    model.config.epochs = c.at("epochs").get<int>();
    model.config.lambda = c.at("lambda").get<double>();
    model.config.learning_rate = c.at("learning_rate").get<double>();
    model.config.batch_multiplier = c.at("batch_multiplier").get<int>();
    model.config.windows_per_epoch = c.at("windows_per_epoch").get<int>();
    model.config.context = c.at("context").get<int>();
    model.config.horizon = c.at("horizon").get<int>();
    model.config.seed = c.at("seed").get<std::uint64_t>();
    model.config.kl_mode = kl_mode_from_string(c.at("kl_mode").get<std::string>());
    model.config.kl_samples = c.at("kl_samples").get<int>();
    model.config.embedding_dim = c.at("embedding_dim").get<int>();
    model.config.grad_clip = c.at("grad_clip").get<double>();
    model.config.seasonal_period = c.at("seasonal_period").get<int>();
    model.node_ids = j.at("node_ids").get<std::vector<std::string>>();
    model.hierarchy_edges = j.at("hierarchy_edges").get<std::string>();
    const auto scale = j.at("scale").get<std::vector<double>>();
    model.scale = Eigen::Map<const Eigen::VectorXd>(
        scale.data(), static_cast<Eigen::Index>(scale.size()));
    model.weights = j.at("weights").get<std::vector<double>>();
    model.loss_trace = j.at("loss_trace").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ModelError("model file '" + path + "' is missing fields: " +
                     e.what());
  }
  return model;
}

}  // namespace hiercast
