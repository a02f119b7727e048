#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ghazalforge/cells.hpp"
#include "support/oracles.hpp"

using namespace ghazalforge;

TEST_CASE("cell kind names round trip") {
    for (CellKind k : {CellKind::rnn, CellKind::lstm, CellKind::gru})
        CHECK(cell_kind_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(cell_kind_from_string("transformer"), std::runtime_error);
}

TEST_CASE("param_count formulas") {
    // gate block: H*V + H*H + H, output head: V*H + V
    CHECK(param_count(CellKind::rnn, 1, 1) == 1 + 1 + 1 + 1 + 1);
    CHECK(param_count(CellKind::lstm, 2, 3) == 57);
    CHECK(param_count(CellKind::rnn, 128, 500) ==
          128 * 500 + 128 * 128 + 128 + 500 * 128 + 500);
    for (std::size_t h = 1; h <= 8; ++h) {
        for (std::size_t v = 1; v <= 8; ++v) {
            const std::size_t gate = h * v + h * h + h;
            const std::size_t head = v * h + v;
            CHECK(param_count(CellKind::rnn, h, v) == gate + head);
            CHECK(param_count(CellKind::lstm, h, v) == 4 * gate + head);
            CHECK(param_count(CellKind::gru, h, v) == 3 * gate + head);
            CHECK(param_count(CellKind::gru, h, v) < param_count(CellKind::lstm, h, v));
        }
    }
    CHECK_THROWS_AS(param_count(CellKind::rnn, 0, 4), std::invalid_argument);
    CHECK_THROWS_AS(param_count(CellKind::rnn, 4, 0), std::invalid_argument);
}

TEST_CASE("tensor order is fixed and sizes sum to param_count") {
    const std::size_t H = 3, V = 5;

    RnnParams<double> rnn(H, V);
    const std::vector<std::string> rnn_names = {"U", "W", "V", "b", "c"};
    auto rt = rnn.tensors();
    REQUIRE(rt.size() == rnn_names.size());
    std::size_t total = 0;
    for (std::size_t i = 0; i < rt.size(); ++i) {
        CHECK(rt[i].name == rnn_names[i]);
        total += rt[i].size;
    }
    CHECK(total == param_count(CellKind::rnn, H, V));

    LstmParams<double> lstm(H, V);
    const std::vector<std::string> lstm_names = {
        "U_f", "U_i", "U_o", "U_g", "W_f", "W_i", "W_o", "W_g",
        "b_f", "b_i", "b_o", "b_g", "V",   "c"};
    auto lt = lstm.tensors();
    REQUIRE(lt.size() == lstm_names.size());
    total = 0;
    for (std::size_t i = 0; i < lt.size(); ++i) {
        CHECK(lt[i].name == lstm_names[i]);
        total += lt[i].size;
    }
    CHECK(total == param_count(CellKind::lstm, H, V));

    GruParams<double> gru(H, V);
    const std::vector<std::string> gru_names = {"U_r", "U_u", "U_g", "W_r", "W_u",
                                                "W_g", "b_r", "b_u", "b_g", "V", "c"};
    auto gt = gru.tensors();
    REQUIRE(gt.size() == gru_names.size());
    total = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        CHECK(gt[i].name == gru_names[i]);
        total += gt[i].size;
    }
    CHECK(total == param_count(CellKind::gru, H, V));
}

TEST_CASE("make_params, kind_of, hidden_of, vocab_of") {
    for (CellKind k : {CellKind::rnn, CellKind::lstm, CellKind::gru}) {
        ModelParams<double> p = make_params<double>(k, 4, 7);
        CHECK(kind_of(p) == k);
        CHECK(hidden_of(p) == 4);
        CHECK(vocab_of(p) == 7);
    }
}

TEST_CASE("congruent compares tensor layouts") {
    GruParams<double> a(3, 5), b(3, 5), c(4, 5);
    CHECK(congruent(a, b));
    CHECK_FALSE(congruent(a, c));
}

TEST_CASE("init_params: biases zero, weights bounded by fan-in, deterministic") {
    std::mt19937_64 g1(42), g2(42), g3(43);
    LstmParams<double> p1(5, 9), p2(5, 9), p3(5, 9);
    init_params(p1, g1);
    init_params(p2, g2);
    init_params(p3, g3);

    for (const auto& v : {p1.b_f, p1.b_i, p1.b_o, p1.b_g, p1.c})
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(v[i] == 0.0);

    const double ub = 1.0 / std::sqrt(9.0);   // input matrices, fan_in = vocab
    const double wb = 1.0 / std::sqrt(5.0);   // recurrent matrices, fan_in = hidden
    for (std::size_t i = 0; i < p1.U_f.size(); ++i) {
        CHECK(std::abs(p1.U_f.data()[i]) <= ub);
    }
    for (std::size_t i = 0; i < p1.W_f.size(); ++i) {
        CHECK(std::abs(p1.W_f.data()[i]) <= wb);
    }

    auto t1 = p1.tensors();
    auto t2 = p2.tensors();
    auto t3 = p3.tensors();
    bool identical = true, differs = false;
    for (std::size_t t = 0; t < t1.size(); ++t)
        for (std::size_t i = 0; i < t1[t].size; ++i) {
            if (t1[t].data[i] != t2[t].data[i]) identical = false;
            if (t1[t].data[i] != t3[t].data[i]) differs = true;
        }
    CHECK(identical);
    CHECK(differs);
}

TEST_CASE("randomize_uniform fills every tensor within the range") {
    std::mt19937_64 gen(5);
    GruParams<double> p(3, 4);
    randomize_uniform(p, -0.5, 0.5, gen);
    bool any_nonzero_bias = false;
    for (const auto& t : p.tensors())
        for (std::size_t i = 0; i < t.size; ++i) {
            CHECK(t.data[i] >= -0.5);
            CHECK(t.data[i] < 0.5);
            if (t.name[0] == 'b' && t.data[i] != 0.0) any_nonzero_bias = true;
        }
    CHECK(any_nonzero_bias);  // unlike init_params, biases are randomized too
}

TEST_CASE("zero_state shapes") {
    const auto r = zero_state<double>(CellKind::rnn, 6);
    CHECK(r.h.size() == 6);
    CHECK(r.c.empty());
    const auto l = zero_state<double>(CellKind::lstm, 6);
    CHECK(l.h.size() == 6);
    CHECK(l.c.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(l.h[i] == 0.0);
        CHECK(l.c[i] == 0.0);
    }
}

TEST_CASE("rnn forward matches independent oracle") {
    std::mt19937_64 gen(101);
    RnnParams<double> p(4, 6);
    randomize_uniform(p, -0.8, 0.8, gen);
    std::vector<double> h_oracle(4);
    Vec<double> h_lib(4);
    for (std::size_t i = 0; i < 4; ++i) {
        h_oracle[i] = uniform_range(gen, -0.9, 0.9);
        h_lib[i] = h_oracle[i];
    }
    for (int x : {0, 3, 5, 2}) {
        const auto want = oracle::rnn_step(p, h_oracle, x);
        const auto got = rnn_forward_step(p, h_lib, x);
        REQUIRE(got.h.size() == 4);
        REQUIRE(got.yhat.size() == 6);
        for (std::size_t i = 0; i < 4; ++i)
            CHECK(got.h[i] == Catch::Approx(want.h[i]).margin(1e-14));
        for (std::size_t i = 0; i < 6; ++i)
            CHECK(got.yhat[i] == Catch::Approx(want.yhat[i]).margin(1e-14));
        // logits should be consistent with h too
        for (std::size_t i = 0; i < 6; ++i) {
            double o = p.c[i];
            for (std::size_t j = 0; j < 4; ++j) o += p.V(i, j) * got.h[j];
            CHECK(got.o[i] == Catch::Approx(o).margin(1e-14));
        }
        h_oracle = want.h;
        h_lib = got.h;
    }
}

TEST_CASE("lstm forward matches independent oracle") {
    std::mt19937_64 gen(202);
    LstmParams<double> p(3, 5);
    randomize_uniform(p, -0.7, 0.7, gen);
    std::vector<double> ho(3, 0.0), co(3, 0.0);
    Vec<double> hl(3), cl(3);
    for (int x : {4, 0, 2, 2, 1}) {
        const auto want = oracle::lstm_step(p, ho, co, x);
        const auto got = lstm_forward_step(p, hl, cl, x);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(got.h[i] == Catch::Approx(want.h[i]).margin(1e-14));
            CHECK(got.cell_c[i] == Catch::Approx(want.c[i]).margin(1e-14));
        }
        for (std::size_t i = 0; i < 5; ++i)
            CHECK(got.yhat[i] == Catch::Approx(want.yhat[i]).margin(1e-14));
        ho = want.h;
        co = want.c;
        hl = got.h;
        cl = got.cell_c;
    }
}

TEST_CASE("gru forward matches independent oracle") {
    std::mt19937_64 gen(303);
    GruParams<double> p(5, 4);
    randomize_uniform(p, -0.9, 0.9, gen);
    std::vector<double> ho(5, 0.0);
    Vec<double> hl(5);
    for (int x : {1, 3, 0, 2, 3, 1}) {
        const auto want = oracle::gru_step(p, ho, x);
        const auto got = gru_forward_step(p, hl, x);
        for (std::size_t i = 0; i < 5; ++i)
            CHECK(got.h[i] == Catch::Approx(want.h[i]).margin(1e-14));
        for (std::size_t i = 0; i < 4; ++i)
            CHECK(got.yhat[i] == Catch::Approx(want.yhat[i]).margin(1e-14));
        ho = want.h;
        hl = got.h;
    }
}

TEST_CASE("rnn bias alone forces the hidden state") {
    // zero weights: h = tanh(b) exactly, independent of input and state
    RnnParams<double> p(3, 4);
    const double target = 0.5;
    const double pre = std::atanh(target);
    p.b.fill(pre);
    const auto tr = rnn_forward_step(p, Vec<double>(3), 2);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(tr.h[i] == Catch::Approx(target).margin(1e-15));
}

TEST_CASE("all-zero parameters give a uniform prediction") {
    for (CellKind k : {CellKind::rnn, CellKind::lstm, CellKind::gru}) {
        ModelParams<double> p = make_params<double>(k, 4, 7);
        const auto tr = forward_step(p, zero_state<double>(k, 4), 3);
        for (std::size_t i = 0; i < 7; ++i) CHECK(tr.yhat[i] == 1.0 / 7.0);
    }
}

TEST_CASE("forward step input validation") {
    RnnParams<double> p(3, 4);
    CHECK_THROWS_AS(rnn_forward_step(p, Vec<double>(3), -1), std::invalid_argument);
    CHECK_THROWS_AS(rnn_forward_step(p, Vec<double>(3), 4), std::invalid_argument);
    CHECK_THROWS_AS(rnn_forward_step(p, Vec<double>(2), 0), std::invalid_argument);

    LstmParams<double> q(3, 4);
    CHECK_THROWS_AS(lstm_forward_step(q, Vec<double>(3), Vec<double>(2), 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(lstm_forward_step(q, Vec<double>(3), Vec<double>(3), 9),
                    std::invalid_argument);

    GruParams<double> r(3, 4);
    CHECK_THROWS_AS(gru_forward_step(r, Vec<double>(4), 0), std::invalid_argument);
}

TEST_CASE("forward_sequence chains states exactly") {
    std::mt19937_64 gen(404);
    GruParams<double> p(4, 5);
    randomize_uniform(p, -0.6, 0.6, gen);
    const std::vector<int> inputs = {0, 4, 1, 3, 2, 2, 0};

    const auto traces = forward_sequence(p, Vec<double>(4), inputs);
    REQUIRE(traces.size() == inputs.size());

    Vec<double> h(4);
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        const auto step = gru_forward_step(p, h, inputs[t]);
        CHECK(traces[t].x_index == inputs[t]);
        for (std::size_t i = 0; i < 4; ++i) CHECK(traces[t].h[i] == step.h[i]);
        h = step.h;
    }

    CHECK_THROWS_AS(forward_sequence(p, Vec<double>(4), std::span<const int>()),
                    std::invalid_argument);
}

TEST_CASE("variant forward_step dispatches to the concrete cell") {
    std::mt19937_64 gen(505);
    LstmParams<double> direct(3, 6);
    randomize_uniform(direct, -0.5, 0.5, gen);
    ModelParams<double> p = direct;
    CellState<double> s = zero_state<double>(CellKind::lstm, 3);
    s.h[1] = 0.25;
    s.c[0] = -0.4;

    const auto via_variant = forward_step(p, s, 5);
    const auto via_direct = lstm_forward_step(direct, s.h, s.c, 5);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(via_variant.h[i] == via_direct.h[i]);
        CHECK(via_variant.cell_c[i] == via_direct.cell_c[i]);
    }
    for (std::size_t i = 0; i < 6; ++i)
        CHECK(via_variant.yhat[i] == via_direct.yhat[i]);
}

TEST_CASE("float instantiation compiles and runs") {
    std::mt19937_64 gen(606);
    RnnParams<float> p(3, 4);
    init_params(p, gen);
    const auto tr = rnn_forward_step(p, Vec<float>(3), 1);
    double sum = 0;
    for (std::size_t i = 0; i < 4; ++i) sum += tr.yhat[i];
    CHECK(sum == Catch::Approx(1.0).margin(1e-6));
}
