#include "doctest.h"

#include "mixsnn/graph.hpp"

using namespace mixsnn;

namespace {

NeuronModule neurons(Index n, MatrixXd rec, const SimParams& p = default_params()) {
  NeuronModule m;
  m.size = n;
  m.params.assign(static_cast<std::size_t>(n), p);
  m.w_rec = std::move(rec);
  return m;
}

void check_same(const NetGraph& a, const NetGraph& b) {
  REQUIRE(a.nodes.size() == b.nodes.size());
  CHECK(a.edges == b.edges);
  CHECK(a.input_tags == b.input_tags);
  CHECK(a.input_node == b.input_node);
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    REQUIRE(a.nodes[i].index() == b.nodes[i].index());
    if (auto* l = std::get_if<LinearWeightsNode>(&a.nodes[i])) {
      const auto& r = std::get<LinearWeightsNode>(b.nodes[i]);
      CHECK(l->weights == r.weights);
      CHECK(l->source_tags == r.source_tags);
      CHECK(l->dest_tags == r.dest_tags);
      CHECK(l->recurrent == r.recurrent);
    } else {
      const auto& n = std::get<DynapseNeuronsNode>(a.nodes[i]);
      const auto& r = std::get<DynapseNeuronsNode>(b.nodes[i]);
      CHECK(n.tags == r.tags);
      CHECK(n.params == r.params);
      CHECK(n.model == r.model);
    }
  }
}

}  // namespace

TEST_CASE("toy network gives three nodes") {
  MatrixXd w_in = MatrixXd::Random(60, 2);
  MatrixXd w_rec = MatrixXd::Random(2, 2);
  Network net = make_network(w_in, w_rec, default_params());
  NetGraph g = as_graph(spec_from_network(net));
  REQUIRE(g.nodes.size() == 3);
  const auto& in = std::get<LinearWeightsNode>(g.nodes[0]);
  const auto& neu = std::get<DynapseNeuronsNode>(g.nodes[1]);
  const auto& rec = std::get<LinearWeightsNode>(g.nodes[2]);
  CHECK(in.weights == w_in);
  CHECK_FALSE(in.recurrent);
  CHECK(neu.tags == std::vector<int>{60, 61});
  CHECK(rec.weights == w_rec);
  CHECK(rec.recurrent);
  CHECK(g.input_tags.size() == 60);
  CHECK_NOTHROW(g.validate());
}

TEST_CASE("zero recurrence is kept as an explicit block") {
  NetSpec spec{{LinearModule{MatrixXd::Ones(4, 3)}, neurons(3, MatrixXd::Zero(3, 3))}};
  NetGraph g = as_graph(spec);
  REQUIRE(g.nodes.size() == 3);
  CHECK(std::get<LinearWeightsNode>(g.nodes[2]).weights == MatrixXd::Zero(3, 3));
}

TEST_CASE("degenerate and broken specs are rejected") {
  CHECK_THROWS_AS(as_graph(NetSpec{}), ValidationError);
  NetSpec broken{{LinearModule{MatrixXd::Ones(4, 3)}, neurons(2, MatrixXd::Zero(2, 2))}};
  CHECK_THROWS_AS(as_graph(broken), ValidationError);
  NetSpec no_neurons{{LinearModule{MatrixXd::Ones(4, 3)}}};
  CHECK_THROWS_AS(as_graph(no_neurons), ValidationError);
  NetSpec bad_rec{{LinearModule{MatrixXd::Ones(4, 3)}, neurons(3, MatrixXd::Zero(2, 2))}};
  CHECK_THROWS_AS(as_graph(bad_rec), ValidationError);
}

TEST_CASE("graph round trip") {
  NetSpec spec{{LinearModule{MatrixXd::Random(60, 2)}, neurons(2, MatrixXd::Random(2, 2)),
                LinearModule{MatrixXd::Random(2, 3)}, neurons(3, MatrixXd::Random(3, 3))}};
  NetGraph g = as_graph(spec);
  CHECK_NOTHROW(g.validate());
  check_same(g, as_graph(net_from_graph(g)));
  CHECK(std::get<DynapseNeuronsNode>(g.nodes[4]).tags == std::vector<int>{62, 63, 64});
}

TEST_CASE("malformed graphs") {
  NetGraph g = as_graph(spec_from_network(make_network(MatrixXd::Ones(3, 2), MatrixXd::Zero(2, 2),
                                                       default_params())));
  NetGraph dangling = g;
  dangling.edges.push_back({1, 7});
  CHECK_THROWS_AS(net_from_graph(dangling), ValidationError);
  NetGraph dup = g;
  std::get<DynapseNeuronsNode>(dup.nodes[1]).tags = {0, 1};
  CHECK_THROWS_AS(dup.validate(), ValidationError);
  CHECK_THROWS_AS(net_from_graph(NetGraph{}), ValidationError);
  CHECK_THROWS_AS(model_from_name("hodgkin_huxley"), ValidationError);
}

TEST_CASE("a lone neuron node receives its inputs one to one") {
  NetGraph g;
  DynapseNeuronsNode n;
  n.tags = {3, 4, 5};
  n.params.assign(3, default_params());
  g.nodes.emplace_back(n);
  g.input_tags = {0, 1, 2};
  NetSpec spec = net_from_graph(g);
  CHECK(spec.weights(0).weights == MatrixXd::Identity(3, 3));
  CHECK(spec.neurons(0).w_rec == MatrixXd::Zero(3, 3));

  g.input_tags = {0, 1};
  CHECK_THROWS_AS(net_from_graph(g), ValidationError);
}

TEST_CASE("LIF layers convert through the time-constant inversion") {
  LifParams lif;
  lif.tau_mem = 20e-3;
  lif.t_ref = 2e-3;
  PhysicalConstants k;
  SimParams p = lif_to_dynapsim(lif);
  CHECK(derive_time_constant(p[Current::Itau_mem], k.C_mem, k) == doctest::Approx(20e-3));
  CHECK(derive_time_constant(p[Current::Iref], k.C_ref, k) == doctest::Approx(2e-3));

  NeuronModule m;
  m.model = NeuronModel::lif;
  m.lif = lif;
  m.size = 2;
  m.w_rec = MatrixXd::Zero(2, 2);
  NetGraph g = as_graph(NetSpec{{LinearModule{MatrixXd::Ones(3, 2)}, m}});
  NetGraph d = convert_to_dynapsim(g);
  const auto& neu = std::get<DynapseNeuronsNode>(d.nodes[1]);
  CHECK(neu.model == NeuronModel::dynapsim);
  REQUIRE(neu.params.size() == 2);
  CHECK(neu.params[0] == p);
  CHECK_THROWS_AS(evolve_layered(net_from_graph(g), SpikeRaster(3, 3, 1e-3)), ValidationError);
}
