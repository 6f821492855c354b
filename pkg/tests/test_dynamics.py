import math

import numpy as np
import pytest

from duelcast.dynamics import (
    DEFAULT_INTENDED,
    DEFAULT_PHI0,
    GameDefinition,
    ReactionSpec,
    apply_reactions,
    constant_schedule,
    eval_rhs,
    extend_history,
    scenario,
    simulate,
)
from duelcast.errors import BadParams, NonFiniteState, UnknownScenario
from duelcast.numerics import TimeGrid


@pytest.fixture(scope="module")
def linear_duel():
    return scenario("linear-duel")


def simulate_scenario(name, h=0.01, count=201, uo=None, phi0=None):
    game, spec = scenario(name)
    uo = uo if uo is not None else DEFAULT_INTENDED[name]
    phi0 = phi0 if phi0 is not None else DEFAULT_PHI0[name]
    grid = TimeGrid(0.0, h, count)
    return game, spec, simulate(game, spec, constant_schedule(uo), grid, np.asarray(phi0, float))


class TestEvalRhs:
    def test_linear_duel_direct(self, linear_duel):
        game, _ = linear_duel
        assert eval_rhs(game, np.array([1.0]), np.array([0.7, -0.35]))[0] == pytest.approx(1.05)

    def test_symmetric_controls_cancel(self, linear_duel):
        game, _ = linear_duel
        for c in (0.0, 1.3, -2.0):
            assert eval_rhs(game, np.array([4.2]), np.array([c, c]))[0] == 0.0

    def test_unit(self, linear_duel):
        game, _ = linear_duel
        assert eval_rhs(game, np.array([0.0]), np.array([1.0, 0.0]))[0] == 1.0


class TestApplyReactions:
    def test_linear_duel_example(self, linear_duel):
        _, spec = linear_duel
        u = apply_reactions(spec, np.array([0.2, -0.1]), np.array([1.0]), np.zeros((0, 1)))
        assert np.allclose(u, [0.7, -0.35], atol=1e-15)

    def test_zero_everything(self, linear_duel):
        _, spec = linear_duel
        u = apply_reactions(spec, np.zeros(2), np.zeros(1), np.zeros((0, 1)))
        assert np.array_equal(u, np.zeros(2))

    def test_zero_feedback_degenerates(self):
        _, spec = scenario("linear-duel", {"k": (0.0, 0.0)})
        uo = np.array([0.37, -0.81])
        u = apply_reactions(spec, uo, np.array([5.0]), np.zeros((0, 1)))
        assert np.array_equal(u, uo)


class TestScenarios:
    def test_linear_duel_dims(self):
        game, spec = scenario("linear-duel", {"k": (0.5, -0.25)})
        assert game.d == 2 and game.state_dim == 1
        assert spec.max_derivative_order == 0

    def test_cross_coupled_uses_derivatives(self):
        game, spec = scenario("cross-coupled")
        assert spec.max_derivative_order == 1

    def test_planar_pursuit_dims(self):
        game, spec = scenario("planar-pursuit")
        assert game.d == 4 and game.state_dim == 4

    def test_unknown_scenario(self):
        with pytest.raises(UnknownScenario):
            scenario("no-such")

    def test_bad_params(self):
        with pytest.raises(BadParams):
            scenario("linear-duel", {"k": (1.0,)})
        with pytest.raises(BadParams):
            scenario("linear-duel", {"k": (math.nan, 0.0)})


class TestSimulate:
    def test_closed_form_linear_duel(self):
        # Closed loop phi' = 0.3 + 0.75 phi from phi0 = 1.
        _, _, hist = simulate_scenario("linear-duel", h=0.01, count=101)
        t = hist.grid.times()
        closed = 1.4 * np.exp(0.75 * t) - 0.4
        assert np.max(np.abs(hist.phi[:, 0] - closed)) <= 5e-3

        _, _, hist = simulate_scenario("linear-duel", h=0.001, count=1001)
        t = hist.grid.times()
        closed = 1.4 * np.exp(0.75 * t) - 0.4
        assert np.max(np.abs(hist.phi[:, 0] - closed)) <= 5e-5

    def test_cross_check_fine_grid(self):
        _, _, coarse = simulate_scenario("linear-duel", h=0.01, count=101)
        _, _, fine = simulate_scenario("linear-duel", h=1e-4, count=10001)
        assert abs(coarse.phi[-1, 0] - fine.phi[-1, 0]) < 1e-6

    def test_frozen_game_is_constant(self):
        game = GameDefinition("frozen", 1, (1, 1), lambda phi, u: np.zeros(1))
        spec = ReactionSpec(
            reactions=(lambda uo, phi, d: uo * 0.0, lambda uo, phi, d: uo * 0.0),
            control_dims=(1, 1),
        )
        hist = simulate(game, spec, constant_schedule([0.0, 0.0]), TimeGrid(0.0, 0.1, 20), np.array([2.5]))
        assert np.all(hist.phi == 2.5)
        assert np.all(hist.u_realized == 0.0)

    def test_determinism(self):
        _, _, a = simulate_scenario("planar-pursuit")
        _, _, b = simulate_scenario("planar-pursuit")
        assert np.array_equal(a.phi, b.phi)
        assert np.array_equal(a.u_realized, b.u_realized)
        assert np.array_equal(a.u_intended, b.u_intended)

    def test_reaction_identity_white_box(self):
        _, _, hist = simulate_scenario("linear-duel")
        reaction = hist.u_realized - hist.u_intended
        expected = np.column_stack([0.5 * hist.phi[:, 0], -0.25 * hist.phi[:, 0]])
        assert np.max(np.abs(reaction - expected)) < 1e-14

    def test_non_finite_reports_step(self):
        game = GameDefinition("blowup", 1, (1, 1), lambda phi, u: phi**2)
        spec = ReactionSpec(
            reactions=(lambda uo, phi, d: uo, lambda uo, phi, d: uo),
            control_dims=(1, 1),
        )
        with np.errstate(over="ignore"), pytest.raises(NonFiniteState) as exc_info:
            simulate(game, spec, constant_schedule([0.0, 0.0]), TimeGrid(0.0, 0.5, 60), np.array([3.0]))
        assert exc_info.value.step is not None

    @pytest.mark.parametrize(
        "name,bound",
        [("linear-duel", 1e-6), ("cross-coupled", 0.5), ("planar-pursuit", 1e-6)],
    )
    def test_h_refinement_first_order(self, name, bound):
        # |phi_h(T) - phi_{h/2}(T)| <= C h; the lagged derivative estimates make
        # cross-coupled genuinely first order, the others converge much faster.
        _, _, coarse = simulate_scenario(name, h=0.01, count=101)
        _, _, fine = simulate_scenario(name, h=0.005, count=201)
        diff = np.linalg.norm(coarse.phi[-1] - fine.phi[-1])
        assert diff <= bound * 0.01


class TestExtendHistory:
    def test_matches_single_run(self):
        game, spec = scenario("cross-coupled")
        grid_full = TimeGrid(0.0, 0.01, 151)
        sched = constant_schedule(DEFAULT_INTENDED["cross-coupled"])
        full = simulate(game, spec, sched, grid_full, np.array([1.0]))
        part = simulate(game, spec, sched, TimeGrid(0.0, 0.01, 101), np.array([1.0]))
        extended = extend_history(game, spec, part, sched, 50)
        assert np.array_equal(extended.phi, full.phi)
        assert np.array_equal(extended.u_realized, full.u_realized)
        assert np.array_equal(extended.u_intended, full.u_intended)

    def test_zero_steps_identity(self):
        game, spec = scenario("linear-duel")
        sched = constant_schedule([0.2, -0.1])
        hist = simulate(game, spec, sched, TimeGrid(0.0, 0.01, 11), np.array([1.0]))
        assert extend_history(game, spec, hist, sched, 0) is hist


class TestHistoryValidation:
    def test_shape_mismatch(self):
        grid = TimeGrid(0.0, 0.1, 3)
        from duelcast.dynamics import History

        with pytest.raises(BadParams):
            History(grid, np.zeros((2, 1)), np.zeros((3, 2)), np.zeros((3, 2)))

    def test_non_finite_rejected(self):
        from duelcast.dynamics import History

        grid = TimeGrid(0.0, 0.1, 3)
        phi = np.zeros((3, 1))
        phi[1, 0] = math.inf
        with pytest.raises(BadParams):
            History(grid, phi, np.zeros((3, 2)), np.zeros((3, 2)))
