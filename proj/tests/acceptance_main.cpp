// Acceptance suite: one numbered criterion per function, each printing a
// single pass/fail line. Run with a criterion number, or no argument for all.
#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <Eigen/LU>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hypersched/complexity.hpp"
#include "hypersched/encode.hpp"
#include "hypersched/gp.hpp"
#include "hypersched/priority.hpp"
#include "hypersched/protocol.hpp"
#include "hypersched/scheduler.hpp"
#include "hypersched/sim.hpp"
#include "hypersched/spec.hpp"

using namespace hypersched;
namespace fs = std::filesystem;

namespace {

const std::string kDataDir = HS_DATA_DIR;
const std::string kBinDir = HS_BIN_DIR;

int g_checks_failed = 0;

#define EXPECT(cond, ...)                                   \
  do {                                                      \
    if (!(cond)) {                                          \
      ++g_checks_failed;                                    \
      std::printf("    check failed: %s (", #cond);         \
      std::printf(__VA_ARGS__);                             \
      std::printf(")\n");                                   \
    }                                                       \
  } while (0)

// ---------------------------------------------------------------- shared

Domain random_domain(Rng& rng) {
  switch (rng.uniform_int(0, 4)) {
    case 0: {
      const double lo = rng.uniform(-100.0, 100.0);
      return Domain::uniform("u", lo, lo + rng.uniform(0.01, 200.0));
    }
    case 1: {
      const double lo = rng.log_uniform(1e-6, 1.0);
      return Domain::log_uniform("l", lo, lo * rng.uniform(1.5, 1e6));
    }
    case 2:
      return Domain::normal("n", rng.uniform(-10.0, 10.0),
                            rng.uniform(0.01, 20.0));
    case 3: {
      const auto lo = rng.uniform_int(-50, 50);
      return Domain::randint("r", lo, lo + rng.uniform_int(0, 40));
    }
    default: {
      std::vector<Scalar> vals;
      const auto n = rng.uniform_int(1, 20);
      for (std::int64_t i = 0; i < n; ++i) vals.push_back("v" + std::to_string(i));
      return Domain::choice("c", std::move(vals));
    }
  }
}

double naive_lml(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double l,
                 const GPFitConfig& cfg) {
  const auto n = X.rows();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d2 = (X.row(i) - X.row(j)).squaredNorm();
      K(i, j) = cfg.signal_variance * std::exp(-d2 / (2.0 * l * l));
      if (i == j) K(i, j) += cfg.noise_variance;
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  const Eigen::VectorXd alpha = lu.solve(y);
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    log_det += std::log(std::abs(lu.matrixLU()(i, i)));
  }
  return -0.5 * y.dot(alpha) - 0.5 * log_det -
         0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);
}

// ---------------------------------------------------------------- 1

bool criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT(complexity(Domain::choice("c", {std::string("a"), std::string("b"),
                                         std::string("c"),
                                         std::string("d")})) == 1.75,
         "choice |s|=4");
  EXPECT(complexity(Domain::choice("c", {std::string("a")})) == 1.0,
         "choice |s|=1");
  const double u = complexity(Domain::uniform("u", 0.0, 15.0));
  EXPECT(std::abs(u - 16.85) <= 1e-9, "uniform [0,15] gave %.12f", u);

  Rng rng(2001);
  for (int i = 0; i < 1000; ++i) {
    const Domain d = random_domain(rng);
    const double c = complexity(d);
    if (d.is_continuous()) {
      EXPECT(c > 2.0, "continuous %s scored %.6f", to_string(d.kind), c);
    } else {
      EXPECT(c < 2.0 && c >= 1.0, "discrete %s scored %.6f",
             to_string(d.kind), c);
    }
  }
  const double dt = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
  EXPECT(dt < 1.0, "runtime %.2fs", dt);
  return g_checks_failed == 0;
}

// ---------------------------------------------------------------- 2

bool criterion_2() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<double> L = {0.5, 2.0, 1.0};
  EXPECT(priority_from_scales(L) == 1.5, "P({0.5,2,1})");
  const std::vector<double> constant(50, 3.25);
  EXPECT(priority_from_scales(constant) == 0.0, "constant multiset");

  Rng rng(2002);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> scales;
    const auto n = rng.uniform_int(1, 60);
    for (std::int64_t k = 0; k < n; ++k) {
      scales.push_back(rng.log_uniform(1e-3, 1e3));
    }
    EXPECT(priority_from_scales(scales) >= 0.0, "instance %d", i);
  }
  const double dt = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
  EXPECT(dt < 1.0, "runtime %.2fs", dt);
  return g_checks_failed == 0;
}

// ---------------------------------------------------------------- 3

bool criterion_3() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2003);
  GPFitConfig cfg;

  for (int t = 0; t < 50; ++t) {
    const auto n = static_cast<Eigen::Index>(rng.uniform_int(5, 30));
    const auto d = static_cast<Eigen::Index>(rng.uniform_int(1, 3));
    Eigen::MatrixXd X(n, d);
    Eigen::VectorXd y(n);
    const double freq = rng.uniform(0.5, 4.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      double v = 0.0;
      for (Eigen::Index j = 0; j < d; ++j) {
        X(i, j) = rng.uniform01();
        v += std::sin(freq * 2.0 * M_PI * X(i, j));
      }
      y(i) = v + 0.05 * rng.normal(0.0, 1.0);
    }
    const double mean = y.mean();
    const double sd = std::sqrt((y.array() - mean).square().mean());
    if (sd > 0) y = (y.array() - mean) / sd;

    // 200-point log-grid brute force over the independent likelihood
    const double lo = std::log(cfg.l_min), hi = std::log(cfg.l_max);
    const double step = (hi - lo) / 199.0;
    double best_v = -1e300, best_log_l = lo;
    for (int i = 0; i < 200; ++i) {
      const double v = naive_lml(X, y, std::exp(lo + step * i), cfg);
      if (v > best_v) {
        best_v = v;
        best_log_l = lo + step * i;
      }
    }
    const double fitted = fit_length_scale(X, y, 1.0, cfg);
    const double dist = std::abs(std::log(fitted) - best_log_l);
    EXPECT(dist <= step * 1.0000001,
           "problem %d: |log l* - log grid argmax| = %.4f vs cell %.4f", t,
           dist, step);
  }

  // finite-difference gradient check on random small problems
  const double h = 1e-5;
  for (int t = 0; t < 50; ++t) {
    const auto n = static_cast<Eigen::Index>(rng.uniform_int(4, 20));
    Eigen::MatrixXd X(n, 1);
    Eigen::VectorXd y(n);
    const double freq = rng.uniform(0.5, 3.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      X(i, 0) = rng.uniform01();
      y(i) = std::sin(freq * 2.0 * M_PI * X(i, 0)) +
             0.05 * rng.normal(0.0, 1.0);
    }
    const double mean = y.mean();
    const double sd = std::sqrt((y.array() - mean).square().mean());
    if (sd > 0) y = (y.array() - mean) / sd;
    const double log_l = std::log(rng.log_uniform(5e-2, 5e1));
    const double analytic = gp_lml(X, y, std::exp(log_l), cfg).grad_log_l;
    const double up = gp_lml(X, y, std::exp(log_l + h), cfg).value;
    const double dn = gp_lml(X, y, std::exp(log_l - h), cfg).value;
    const double fd = (up - dn) / (2.0 * h);
    const double scale = std::max({std::abs(analytic), std::abs(fd), 1e-7});
    EXPECT(std::abs(analytic - fd) / scale < 1e-4,
           "gradient %d: analytic %.8g vs fd %.8g", t, analytic, fd);
  }

  const double dt = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
  EXPECT(dt < 30.0, "runtime %.2fs", dt);
  return g_checks_failed == 0;
}

// ---------------------------------------------------------------- 4

bool criterion_4() {
  const auto t0 = std::chrono::steady_clock::now();

  const auto toy = split(load_spec_file(kDataDir + "/toy_pipeline.json"));
  EXPECT(toy.size() == 4, "toy forest gave %zu models", toy.size());

  const auto svm = split(load_spec_file(kDataDir + "/svm_kernels.json"));
  EXPECT(svm.size() == 4, "kernel forest gave %zu models", svm.size());
  if (svm.size() == 4) {
    EXPECT(svm[0].domains.size() == 1, "linear leaves");
    EXPECT(svm[1].domains.size() == 2, "rbf leaves");
    EXPECT(svm[2].domains.size() == 3, "sigmoid leaves");
    EXPECT(svm[3].domains.size() == 4, "poly leaves");
    const double linear = model_complexity(svm[0]).total;
    const double rbf = model_complexity(svm[1]).total;
    const double sigmoid = model_complexity(svm[2]).total;
    const double poly = model_complexity(svm[3]).total;
    EXPECT(poly > sigmoid && sigmoid > rbf && rbf > linear,
           "complexity order %.2f %.2f %.2f %.2f", poly, sigmoid, rbf,
           linear);
  }

  // random non-nested trees against the closed-form forest size
  Rng rng(2004);
  for (int t = 0; t < 200; ++t) {
    SpecNode root;
    root.name = "r";
    std::int64_t expected = 1;
    int seq = 0;
    const auto n_children = rng.uniform_int(1, 6);
    for (std::int64_t i = 0; i < n_children; ++i) {
      SpecNode child;
      const double pick = rng.uniform01();
      if (pick < 0.35) {
        child.name = "e" + std::to_string(i);
        child.tag = NodeTag::Exclusive;
        const auto c = rng.uniform_int(1, 4);
        for (std::int64_t k = 0; k < c; ++k) {
          SpecNode leaf;
          leaf.name = "l" + std::to_string(seq++);
          leaf.domain = Domain::uniform(leaf.name, 0, 1);
          child.children.push_back(std::move(leaf));
        }
        expected *= c;
      } else if (pick < 0.7) {
        child.name = "o" + std::to_string(i);
        child.tag = NodeTag::Optional;
        const auto c = rng.uniform_int(1, 3);
        for (std::int64_t k = 0; k < c; ++k) {
          SpecNode leaf;
          leaf.name = "l" + std::to_string(seq++);
          leaf.domain = Domain::uniform(leaf.name, 0, 1);
          child.children.push_back(std::move(leaf));
        }
        expected *= 2;
      } else {
        child.name = "l" + std::to_string(seq++);
        child.domain = Domain::uniform(child.name, 0, 1);
      }
      root.children.push_back(std::move(child));
    }
    const auto forest = split(SpecTree{std::move(root)});
    EXPECT(static_cast<std::int64_t>(forest.size()) == expected,
           "tree %d: %zu models, expected %lld", t, forest.size(),
           static_cast<long long>(expected));
  }

  const double dt = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
  EXPECT(dt < 5.0, "runtime %.2fs", dt);
  return g_checks_failed == 0;
}

// ---------------------------------------------------------------- 5

ModelState mk_state(std::string id, double c, std::optional<double> p) {
  ModelState s;
  s.model_id = std::move(id);
  s.complexity = c;
  s.priority = p;
  return s;
}

bool criterion_5() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2005);

  // argmax preservation
  for (int t = 0; t < 500; ++t) {
    std::vector<ModelState> states;
    const auto n = rng.uniform_int(2, 8);
    double cmax = 0.0, pmax = 0.0;
    for (std::int64_t i = 1; i < n; ++i) {
      const double c = rng.uniform(1.0, 50.0);
      const double p = rng.uniform(0.0, 5.0);
      cmax = std::max(cmax, c);
      pmax = std::max(pmax, p);
      states.push_back(mk_state("m" + std::to_string(i), c, p));
    }
    const bool unknown_best = rng.uniform01() < 0.3;
    states.insert(states.begin(),
                  mk_state("m0", cmax + 1.0,
                           unknown_best ? std::optional<double>()
                                        : std::optional<double>(pmax + 1.0)));
    std::vector<ComputeClass> classes;
    const auto k = rng.uniform_int(1, 4);
    for (std::int64_t j = 0; j < k; ++j) {
      ComputeClass c;
      c.name = "c" + std::to_string(j);
      c.performance_score = static_cast<double>(k - j);
      c.capacity = static_cast<int>(rng.uniform_int(1, 10));
      classes.push_back(std::move(c));
    }
    const auto ranked = rank_models(states);
    EXPECT(ranked[0].model_id == "m0", "instance %d best not first", t);
    EXPECT(ranked[0].combined_rank < ranked[1].combined_rank,
           "instance %d rank not strict", t);
    const auto table = build_schedule(ranked, classes, Mode::Heuristic, 0.1);
    EXPECT(table.assignments.at("m0") == "c0",
           "instance %d best not on the top class", t);
  }

  // monotonicity under a complexity bump
  for (int t = 0; t < 500; ++t) {
    std::vector<ModelState> states;
    const auto n = rng.uniform_int(2, 8);
    for (std::int64_t i = 0; i < n; ++i) {
      states.push_back(mk_state(
          "m" + std::to_string(i), rng.uniform(1.0, 100.0),
          rng.uniform01() < 0.5 ? std::optional<double>(rng.uniform(0.0, 5.0))
                                : std::nullopt));
    }
    std::vector<ComputeClass> classes;
    const auto k = rng.uniform_int(1, 4);
    for (std::int64_t j = 0; j < k; ++j) {
      ComputeClass c;
      c.name = "c" + std::to_string(j);
      c.performance_score = static_cast<double>(k - j);
      c.capacity = static_cast<int>(rng.uniform_int(1, 10));
      classes.push_back(std::move(c));
    }
    const std::size_t target = rng.index(states.size());
    const auto before =
        build_schedule(rank_models(states), classes, Mode::Heuristic, 0.1);
    auto bumped = states;
    bumped[target].complexity += rng.uniform(0.5, 50.0);
    bool tie = false;
    for (std::size_t i = 0; i < bumped.size(); ++i) {
      if (i != target && bumped[i].complexity == bumped[target].complexity) {
        tie = true;
      }
    }
    if (tie) continue;
    const auto after =
        build_schedule(rank_models(bumped), classes, Mode::Heuristic, 0.1);
    const std::string& id = states[target].model_id;
    EXPECT(after.weights.at(id) >= before.weights.at(id) - 1e-12,
           "instance %d weight dropped", t);
    const auto score_of = [&](const std::string& cls) {
      for (const auto& c : classes) {
        if (c.name == cls) return c.performance_score;
      }
      return 0.0;
    };
    EXPECT(score_of(after.assignments.at(id)) >=
               score_of(before.assignments.at(id)),
           "instance %d class demoted", t);
  }

  // weight normalization and coverage
  for (int t = 0; t < 500; ++t) {
    std::vector<ModelState> states;
    const auto n = rng.uniform_int(1, 9);
    for (std::int64_t i = 0; i < n; ++i) {
      states.push_back(mk_state("m" + std::to_string(i),
                                rng.uniform(1.0, 100.0), std::nullopt));
    }
    std::vector<ComputeClass> classes;
    const auto k = rng.uniform_int(1, 4);
    for (std::int64_t j = 0; j < k; ++j) {
      ComputeClass c;
      c.name = "c" + std::to_string(j);
      c.performance_score = static_cast<double>(k - j);
      c.capacity = static_cast<int>(rng.uniform_int(1, 10));
      classes.push_back(std::move(c));
    }
    const auto table =
        build_schedule(rank_models(states), classes, Mode::Heuristic, 0.1);
    double total = 0.0;
    for (const auto& [id, w] : table.weights) total += w;
    EXPECT(std::abs(total - 1.0) <= 1e-9, "instance %d sum %.12f", t, total);
    EXPECT(table.assignments.size() == states.size(),
           "instance %d coverage %zu/%zu", t, table.assignments.size(),
           states.size());
  }

  // fcfs invariance: the served stream ignores heuristic inputs
  for (int t = 0; t < 500; ++t) {
    SchedulerOptions opts;
    opts.mode = Mode::Fcfs;
    opts.seed = 3000 + static_cast<std::uint64_t>(t);
    const auto n = rng.uniform_int(2, 6);
    std::vector<ModelInfo> a, b;
    for (std::int64_t i = 0; i < n; ++i) {
      ModelInfo info;
      info.space.model_id = "m" + std::to_string(i);
      info.space.domains = {
          Domain::uniform("m" + std::to_string(i) + "/x", 0.0, 1.0)};
      info.complexity = rng.uniform(1.0, 100.0);
      a.push_back(info);
      info.complexity = rng.uniform(1.0, 100.0);
      b.push_back(std::move(info));
    }
    Scheduler sa(std::move(a), {{"c", 1.0, {}}}, opts);
    Scheduler sb(std::move(b), {{"c", 1.0, {}}}, opts);
    sa.register_worker({"w", "c", {}, 0.0}, 0.0);
    sb.register_worker({"w", "c", {}, 0.0}, 0.0);
    Rng ra(4000 + static_cast<std::uint64_t>(t));
    Rng rb(4000 + static_cast<std::uint64_t>(t));
    for (int i = 0; i < 20; ++i) {
      const std::string ma = sa.next_task("w", ra);
      const std::string mb = sb.next_task("w", rb);
      const Assignment xa = sample(sa.model(ma), ra);
      const Assignment xb = sample(sb.model(mb), rb);
      EXPECT(ma == mb && xa == xb, "instance %d draw %d diverged", t, i);
    }
  }

  const double dt = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
  EXPECT(dt < 30.0, "runtime %.2fs", dt);
  return g_checks_failed == 0;
}

// ---------------------------------------------------------------- 6

bool criterion_6() {
  const auto t0 = std::chrono::steady_clock::now();

  const Scenario scenario =
      load_scenario_file(kDataDir + "/svm_analog.scenario.json");
  // pinned desk-scale layout: speeds 1/2/4, 5 workers each, costs 60/45/30/15
  EXPECT(scenario.classes.size() == 3, "class count");
  EXPECT(scenario.models.size() == 4, "model count");
  EXPECT(scenario.duration_s == 4.0 * 3600.0, "duration");

  const PolicyComparison cmp =
      compare_policies(scenario, {Mode::Heuristic, Mode::Fcfs}, 20);
  const PolicyStats& heur = cmp.per_policy.at("heuristic");
  const PolicyStats& fcfs = cmp.per_policy.at("fcfs");
  const double ratio = heur.mean / fcfs.mean;
  std::printf(
      "    heuristic mean %.2f/hr (sd %.2f), fcfs mean %.2f/hr (sd %.2f), "
      "ratio %.3f\n",
      heur.mean, heur.stddev, fcfs.mean, fcfs.stddev, ratio);
  EXPECT(ratio >= 1.3, "ratio %.3f < 1.3", ratio);
  EXPECT(heur.stddev <= fcfs.stddev, "stddev %.2f > %.2f", heur.stddev,
         fcfs.stddev);

  const Scenario control =
      load_scenario_file(kDataDir + "/homogeneous.scenario.json");
  const PolicyComparison null_cmp =
      compare_policies(control, {Mode::Heuristic, Mode::Fcfs}, 20);
  const double null_ratio = *null_cmp.ratio_heuristic_over_fcfs;
  std::printf("    homogeneous control ratio %.3f\n", null_ratio);
  EXPECT(null_ratio >= 0.95 && null_ratio <= 1.05, "control ratio %.3f",
         null_ratio);

  const double dt = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
  EXPECT(dt < 60.0, "runtime %.2fs", dt);
  return g_checks_failed == 0;
}

// ---------------------------------------------------------------- 7

std::string rand_token(Rng& rng) {
  static const char alphabet[] =
      "abcdefghijklmnopqrstuvwxyz0123456789_-./= ";
  std::string s;
  const auto n = rng.uniform_int(0, 20);
  for (std::int64_t i = 0; i < n; ++i) {
    s += alphabet[rng.index(sizeof(alphabet) - 1)];
  }
  return s;
}

bool criterion_7() {
  const auto t0 = std::chrono::steady_clock::now();

  // bit-exact golden line per message type
  EXPECT(encode(Message::make_heartbeat("w1")) ==
             "{\"type\":\"heartbeat\",\"worker_id\":\"w1\"}\n",
         "heartbeat golden");
  EXPECT(encode(Message::make_request("w9")) ==
             "{\"type\":\"request\",\"worker_id\":\"w9\"}\n",
         "request golden");
  EXPECT(
      encode(Message::make_register("w1", {{"cores", "8"}, {"gpu", "k80"}})) ==
          "{\"features\":{\"cores\":\"8\",\"gpu\":\"k80\"},"
          "\"type\":\"register\",\"worker_id\":\"w1\"}\n",
      "register golden");
  Message task;
  task.type = MsgType::Task;
  task.task_id = 7;
  task.model_id = "(svm=rbf)";
  task.assignment = {{"svm/rbf/C", 1.5}, {"svm/rbf/gamma", 250.0}};
  task.timeout_s = 60.0;
  EXPECT(encode(task) ==
             "{\"assignment\":{\"svm/rbf/C\":1.5,\"svm/rbf/gamma\":250.0},"
             "\"model_id\":\"(svm=rbf)\",\"task_id\":7,\"timeout_s\":60.0,"
             "\"type\":\"task\"}\n",
         "task golden");
  Message ok;
  ok.type = MsgType::Result;
  ok.task_id = 7;
  ok.status = ResultStatus::Ok;
  ok.loss = 0.5;
  ok.duration_s = 1.25;
  EXPECT(encode(ok) ==
             "{\"duration_s\":1.25,\"log_tail\":\"\",\"loss\":0.5,"
             "\"status\":\"ok\",\"task_id\":7,\"type\":\"result\"}\n",
         "result golden");
  EXPECT(encode(Message::make_shutdown()) == "{\"type\":\"shutdown\"}\n",
         "shutdown golden");
  EXPECT(encode(Message::make_error("unknown_task", "task 99")) ==
             "{\"code\":\"unknown_task\",\"detail\":\"task 99\","
             "\"type\":\"error\"}\n",
         "error golden");

  // 10^4 random round trips
  Rng rng(2007);
  for (int i = 0; i < 10000; ++i) {
    Message m;
    switch (rng.uniform_int(0, 6)) {
      case 0: {
        std::map<std::string, std::string> f;
        const auto n = rng.uniform_int(0, 4);
        for (std::int64_t k = 0; k < n; ++k) {
          f.emplace("k" + std::to_string(k), rand_token(rng));
        }
        m = Message::make_register("w" + std::to_string(i), std::move(f));
        break;
      }
      case 1: m = Message::make_request(rand_token(rng)); break;
      case 2: m = Message::make_heartbeat(rand_token(rng)); break;
      case 3: {
        m.type = MsgType::Task;
        m.task_id = rng.uniform_int(1, 1 << 30);
        m.model_id = rand_token(rng);
        m.timeout_s = rng.uniform(0.01, 1e5);
        const auto n = rng.uniform_int(0, 5);
        for (std::int64_t k = 0; k < n; ++k) {
          const auto kind = rng.uniform_int(0, 2);
          Scalar v = kind == 0   ? Scalar(rng.uniform(-1e8, 1e8))
                     : kind == 1 ? Scalar(rng.uniform_int(-100000, 100000))
                                 : Scalar(rand_token(rng));
          m.assignment.emplace("p" + std::to_string(k), std::move(v));
        }
        break;
      }
      case 4: {
        m.type = MsgType::Result;
        m.task_id = rng.uniform_int(1, 1 << 30);
        const auto pick = rng.uniform_int(0, 2);
        m.status = pick == 0   ? ResultStatus::Ok
                   : pick == 1 ? ResultStatus::Failed
                               : ResultStatus::Timeout;
        if (m.status == ResultStatus::Ok) m.loss = rng.uniform(-1e3, 1e3);
        m.duration_s = rng.uniform(0.0, 1e5);
        m.log_tail = rand_token(rng);
        break;
      }
      case 5: m = Message::make_shutdown(); break;
      default: m = Message::make_error(rand_token(rng), rand_token(rng));
    }
    const Message back = decode(encode(m));
    EXPECT(back == m, "round trip %d", i);
    if (!(back == m)) break;
  }

  const double dt = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
  EXPECT(dt < 5.0, "runtime %.2fs", dt);
  return g_checks_failed == 0;
}

// ---------------------------------------------------------------- 8

pid_t spawn(const std::vector<std::string>& args, const fs::path& log) {
  const pid_t pid = fork();
  if (pid != 0) return pid;
  setpgid(0, 0);
  const int fd =
      ::open(log.c_str(), O_CREAT | O_WRONLY | O_TRUNC, 0644);
  if (fd >= 0) {
    dup2(fd, STDOUT_FILENO);
    dup2(fd, STDERR_FILENO);
    ::close(fd);
  }
  std::vector<char*> argv;
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  execv(argv[0], argv.data());
  _exit(127);
}

bool wait_exit(pid_t pid, double timeout_s, int* status) {
  const auto t0 = std::chrono::steady_clock::now();
  while (true) {
    const pid_t r = waitpid(pid, status, WNOHANG);
    if (r == pid) return true;
    if (r < 0) return false;
    const double dt = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    if (dt > timeout_s) return false;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) ++n;
  }
  return n;
}

bool criterion_8() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir =
      fs::temp_directory_path() / ("hs_accept8_" + std::to_string(getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path out_dir = dir / "out";

  {
    Json spec;
    spec["node"] = "search";
    spec["tag"] = "exclusive";
    Json children = Json::array();
    for (const std::string name : {"alpha", "beta", "gamma"}) {
      Json leaves = Json::array();
      leaves.push_back({{"leaf", "x"},
                        {"domain", {{"kind", "uniform"}, {"lo", 0}, {"hi", 1}}}});
      leaves.push_back({{"leaf", "y"},
                        {"domain", {{"kind", "uniform"}, {"lo", 0}, {"hi", 1}}}});
      children.push_back(
          {{"node", name}, {"tag", "group"}, {"children", leaves}});
    }
    spec["children"] = children;
    std::ofstream f(dir / "space.json");
    f << spec.dump(2);
  }
  {
    Json cfg;
    cfg["spec_path"] = (dir / "space.json").string();
    cfg["mode"] = "heuristic";
    cfg["epsilon"] = 0.1;
    cfg["budget"] = {{"max_trials", 50}};
    cfg["listen"] = {{"host", "127.0.0.1"}, {"port", 0}};
    cfg["classes"] = Json::array({
        {{"name", "fast"}, {"performance_score", 3}, {"match", {{"tier", "fast"}}}},
        {{"name", "medium"}, {"performance_score", 2}, {"match", {{"tier", "medium"}}}},
        {{"name", "slow"}, {"performance_score", 1}, {"match", {{"tier", "slow"}}}},
    });
    cfg["heuristics"] = {{"min_trials", 10}, {"rebuild_every", 25}};
    cfg["task_timeout_s"] = 30;
    cfg["seed"] = 424242;
    cfg["output_dir"] = out_dir.string();
    std::ofstream f(dir / "run.json");
    f << cfg.dump(2);
  }

  const std::string cli = kBinDir + std::string("/hypersched");
  const std::string stub = kBinDir + std::string("/stub_objective");
  const pid_t master =
      spawn({cli, "run", "--config", (dir / "run.json").string()},
            dir / "master.log");

  // wait for the endpoint, then start the workers
  int port = 0;
  for (int i = 0; i < 400 && port == 0; ++i) {
    std::ifstream in(out_dir / "endpoint.json");
    if (in) {
      Json j;
      in >> j;
      port = j.at("port").get<int>();
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(25));
  }
  EXPECT(port != 0, "master endpoint never appeared");

  const std::string endpoint = "127.0.0.1:" + std::to_string(port);
  std::vector<pid_t> workers;
  int widx = 0;
  for (const std::string tier : {"fast", "medium", "slow"}) {
    workers.push_back(spawn(
        {cli, "worker", "--connect", endpoint, "--objective", stub + " 40",
         "--feature", "tier=" + tier, "--id", "w-" + tier, "--scratch",
         (dir / ("scratch" + std::to_string(widx))).string(),
         "--give-up-after", "120"},
        dir / ("worker" + std::to_string(widx) + ".log")));
    ++widx;
  }

  // one injected mid-run kill once results start flowing
  std::size_t lines_at_kill = 0;
  bool killed = false;
  for (int i = 0; i < 12000; ++i) {
    lines_at_kill = count_lines(out_dir / "trials.jsonl");
    if (lines_at_kill >= 10) {
      kill(workers[1], SIGKILL);
      killed = true;
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  EXPECT(killed, "run never reached 10 trials");
  EXPECT(lines_at_kill < 50, "kill landed after the run finished");

  int status = 0;
  const bool master_done = wait_exit(master, 120.0, &status);
  EXPECT(master_done, "master did not finish in time");
  if (!master_done) kill(master, SIGKILL);
  EXPECT(WIFEXITED(status) && WEXITSTATUS(status) == 0, "master exit %d",
         WIFEXITED(status) ? WEXITSTATUS(status) : -1);

  for (const pid_t w : workers) {
    int ws = 0;
    if (!wait_exit(w, 20.0, &ws)) kill(w, SIGKILL), waitpid(w, &ws, 0);
  }

  // ledger assertions
  std::ifstream in(out_dir / "trials.jsonl");
  std::string line;
  std::set<std::int64_t> task_ids;
  std::map<std::string, double> best_per_model;
  double best = 1e300;
  int count = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const Json j = Json::parse(line);
    ++count;
    EXPECT(task_ids.insert(j.at("task_id").get<std::int64_t>()).second,
           "duplicate task id in the ledger");
    const double loss = j.at("loss").get<double>();
    EXPECT(std::isfinite(loss), "non-finite ledger loss");
    best = std::min(best, loss);
    const std::string model = j.at("model_id").get<std::string>();
    const auto it = best_per_model.find(model);
    if (it == best_per_model.end() || loss < it->second) {
      best_per_model[model] = loss;
    }
  }
  EXPECT(count == 50, "ledger has %d ok trials, expected 50", count);

  std::ifstream sum_in(out_dir / "summary.json");
  Json summary;
  sum_in >> summary;
  EXPECT(summary.at("trials_ok").get<int>() == 50, "summary trials_ok");
  EXPECT(summary.at("best").at("loss").get<double>() == best,
         "summary best %.8f vs ledger %.8f",
         summary.at("best").at("loss").get<double>(), best);
  for (const auto& [model, loss] : best_per_model) {
    EXPECT(summary.at("best_per_model").at(model).at("loss").get<double>() ==
               loss,
           "per-model best mismatch for %s", model.c_str());
  }

  // pure-random-search oracle on the same quadratic, 500 draws
  std::mt19937 oracle_rng(20240817);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> oracle_losses;
  for (int i = 0; i < 500; ++i) {
    const double x = unit(oracle_rng), y = unit(oracle_rng);
    oracle_losses.push_back((x - 0.3) * (x - 0.3) + (y - 0.7) * (y - 0.7));
  }
  std::sort(oracle_losses.begin(), oracle_losses.end());
  const double p10 = oracle_losses[49];
  std::printf("    best ledger loss %.6f vs oracle p10 %.6f\n", best, p10);
  EXPECT(best <= p10, "best %.6f above the oracle 10th percentile %.6f", best,
         p10);

  fs::remove_all(dir);
  const double dt = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
  EXPECT(dt < 180.0, "runtime %.2fs", dt);
  return g_checks_failed == 0;
}

// ---------------------------------------------------------------- 9

bool criterion_9() {
  const auto t0 = std::chrono::steady_clock::now();
  ModelSpace model;
  model.model_id = "(m=x)";
  model.domains = {Domain::uniform("m/x", 0.0, 1.0)};
  PriorityConfig cfg;

  int wins = 0;
  for (int s = 0; s < 20; ++s) {
    const auto make_trials = [&](bool wavy) {
      Rng data_rng(9100 + static_cast<std::uint64_t>(s));
      std::vector<TrialRecord> trials;
      for (int i = 0; i < 40; ++i) {
        TrialRecord t;
        t.model_id = model.model_id;
        t.assignment = sample(model, data_rng);
        const double x = std::get<double>(t.assignment.values.at("m/x"));
        t.loss = wavy ? std::sin(6.0 * M_PI * x) : 0.42;
        t.sequence = i + 1;
        trials.push_back(std::move(t));
      }
      return trials;
    };
    Rng p1(9500 + static_cast<std::uint64_t>(s));
    Rng p2(9500 + static_cast<std::uint64_t>(s));
    const double flat = priority(make_trials(false), model, cfg, p1).value();
    const double wavy = priority(make_trials(true), model, cfg, p2).value();
    if (flat < wavy) ++wins;
  }
  std::printf("    constant < sinusoidal in %d of 20 seeds\n", wins);
  EXPECT(wins >= 18, "only %d wins", wins);

  const double dt = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
  EXPECT(dt < 60.0, "runtime %.2fs", dt);
  return g_checks_failed == 0;
}

struct Criterion {
  int number;
  const char* label;
  bool (*fn)();
};

const Criterion kCriteria[] = {
    {1, "domain complexity unit suite", criterion_1},
    {2, "variation score unit suite", criterion_2},
    {3, "length-scale fit vs grid oracle", criterion_3},
    {4, "tree splitting and forest sizes", criterion_4},
    {5, "scheduler ranking properties", criterion_5},
    {6, "simulated throughput comparison", criterion_6},
    {7, "wire protocol round trips", criterion_7},
    {8, "live master/worker smoke run", criterion_8},
    {9, "priority separates flat from varying losses", criterion_9},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  if (argc > 1) only = std::atoi(argv[1]);

  int failures = 0;
  for (const auto& c : kCriteria) {
    if (only != 0 && c.number != only) continue;
    g_checks_failed = 0;
    bool ok = false;
    try {
      ok = c.fn();
    } catch (const std::exception& e) {
      std::printf("    exception: %s\n", e.what());
      ok = false;
    }
    std::printf("criterion %d (%s): %s\n", c.number, c.label,
                ok ? "PASS" : "FAIL");
    if (!ok) ++failures;
  }
  return failures;
}
