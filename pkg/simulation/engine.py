"""
Closed-Loop Engine

Runs the event-triggered formation loop for N vehicles over the configured
horizon. Each step, in order:

    1. at sample instants, draw a noisy position sample for every vehicle
    2. build references (leader profile, followers from predecessors' estimates)
    3. tracking errors z1, z2 and the virtual controller
    4. continuous control μ and the strategy's shaped candidate w
    5. trigger check on e = w − u and zero-order-hold update of u
    6. advance adaptive laws, observers and plants with the held u
    7. log

All vehicles are updated from the state at the start of the step, so the
result does not depend on the order vehicles are processed in. Every vehicle
is forced to trigger at t = 0; the last record carries diagnostics only.
"""

import time
from typing import List

import numpy as np
from loguru import logger

from config.logging_config import log_performance, log_run_event
from config.sim_config import SimConfig
from simulation.sim_log import SimLog
from utils.adaptive_law import (
    AdaptiveState,
    adapt_step,
    continuous_control,
    nn_output,
    rbf_basis,
    tracking_errors,
)
from utils.event_trigger import Branch, TriggerState, candidate_control, hold_update, trigger_condition
from utils.reference_scenario import formation_reference, leader_reference
from utils.sampling_observer import ObserverState, observer_step, sample_position, vehicle_rngs, with_sample
from utils.vehicle_dynamics import plant_step, stack_params


class SimulationAborted(RuntimeError):
    """A state became non-finite during the run."""

    def __init__(self, step: int, t: float, vehicle: int, quantity: str):
        self.step = step
        self.t = t
        self.vehicle = vehicle
        self.quantity = quantity
        super().__init__(
            f"non-finite {quantity} for AV{vehicle} at step {step} (t={t:.3f} s)"
        )


def run_id_for(config: SimConfig) -> str:
    return f"{config.scenario.value}-{config.strategy.value}-seed{config.seed}"


def _first_non_finite(named_arrays) -> tuple:
    """(quantity, vehicle index) of the first non-finite entry, else None."""
    for name, arr in named_arrays:
        bad = ~np.isfinite(arr.reshape(arr.shape[0], -1)).all(axis=1)
        if bad.any():
            return name, int(np.flatnonzero(bad)[0])
    return None


def run_closed_loop(config: SimConfig) -> SimLog:
    """
    Simulate the formation described by config.

    Args:
        config: Validated SimConfig

    Returns:
        SimLog with duration/dt + 1 records

    Raises:
        SimulationAborted: any state turned NaN or infinite
    """
    run_id = run_id_for(config)
    n = config.vehicles
    dt = config.dt
    n_steps = config.n_steps
    strategy = config.strategy

    params = stack_params(config.vehicle_params())
    sampler = config.sampler_config()
    stride = sampler.steps_per_sample(dt)
    obs_gains = config.observer_gains()
    rbf = config.rbf_config()
    gains = config.controller_gains()
    etc = config.etc_params()
    offsets = config.formation_offsets()
    origin = config.reference_origin()
    use_reference_input = config.rbf.input == "reference_velocity"

    log_run_event(
        run_id, "start",
        scenario=config.scenario.value, strategy=strategy.value,
        vehicles=n, duration=config.duration, dt=dt, seed=config.seed,
    )
    logger.info(
        f"Running {strategy.value} strategy on {config.scenario.value} formation: "
        f"N={n}, T={config.duration:g}s, dt={dt:g}s, seed={config.seed}"
    )

    log = SimLog.allocate(config)
    rngs = vehicle_rngs(config.seed, n)

    plant = config.initial_state()
    obs = ObserverState(
        position_estimate=np.array(config.initial.position_estimate, dtype=float),
        velocity_estimate=np.array(config.initial.velocity_estimate, dtype=float),
        latest_sample=np.zeros((n, 2)),
    )
    adaptive = AdaptiveState.initial(rbf.n_hidden, gains.sigma_prior, n_vehicles=n)
    triggers: List[TriggerState] = [TriggerState() for _ in range(n)]
    u_held = np.zeros((n, 2))
    steps_per_second = max(1, int(round(1.0 / dt)))

    started = time.perf_counter()
    with np.errstate(all="ignore"):
        for k in range(n_steps + 1):
            t = k * dt
            final = k == n_steps

            # (1) sampling
            if k % stride == 0:
                sample = np.stack([
                    sample_position(plant.position[i], rngs[i], sampler.noise_bound)
                    for i in range(n)
                ])
                obs = with_sample(obs, sample)

            # (2) references from start-of-step estimates
            ref = formation_reference(obs.position_estimate, offsets, leader_reference(t, origin))

            # (3) tracking errors
            errs = tracking_errors(
                obs.position_estimate, obs.velocity_estimate, ref, obs_gains.C1, obs.latest_sample, gains.K1
            )

            # (4) continuous control and shaped candidate
            gamma = ref.velocity if use_reference_input else obs.velocity_estimate
            basis = rbf_basis(gamma, rbf)
            mu = continuous_control(errs.z1, errs.z2, adaptive, basis, errs.alpha_dot, ref.acceleration, gains)
            w, branch = candidate_control(strategy, mu, errs.z2, u_held, etc)

            # (5) trigger and hold
            if final:
                fired = np.zeros(n, dtype=bool)
            elif k == 0:
                fired = np.ones(n, dtype=bool)
            else:
                fired = np.asarray(trigger_condition(strategy, w - u_held, u_held, etc), dtype=bool)
            for i in np.flatnonzero(fired):
                hold_update(triggers[i], w[i], True, t, Branch(int(branch[i])))
                u_held[i] = triggers[i].held_control

            # (7) log the start-of-step state with this step's signals
            log.position[k] = plant.position
            log.velocity[k] = plant.velocity
            log.position_estimate[k] = obs.position_estimate
            log.velocity_estimate[k] = obs.velocity_estimate
            log.reference_position[k] = ref.position
            log.z1[k] = errs.z1
            log.z2[k] = errs.z2
            log.mu[k] = mu
            log.w[k] = w
            log.u[k] = u_held
            log.triggered[k] = fired
            log.branch[k] = branch
            log.w_hat_norm[k] = adaptive.weight_norm()
            log.sigma_hat_norm[k] = np.sqrt(np.sum(adaptive.sigma_hat ** 2, axis=-1))

            if final:
                break

            # (6) advance with the held control
            nn = nn_output(adaptive, basis)
            adaptive = adapt_step(adaptive, basis, errs.z2, gains, dt)
            obs = observer_step(obs, u_held, nn, obs_gains, dt)
            plant = plant_step(plant, u_held, t, dt, params)

            problem = _first_non_finite([
                ('position', plant.position),
                ('velocity', plant.velocity),
                ('position estimate', obs.position_estimate),
                ('velocity estimate', obs.velocity_estimate),
                ('weights', adaptive.W_hat),
                ('sigma estimate', adaptive.sigma_hat),
                ('control', u_held),
            ])
            if problem is not None:
                quantity, i = problem
                err = SimulationAborted(step=k + 1, t=(k + 1) * dt, vehicle=i + 1, quantity=quantity)
                logger.error(f"Run {run_id} aborted: {err}")
                log_run_event(run_id, "aborted", step=k + 1, vehicle=f"AV{i + 1}", quantity=quantity)
                raise err

            if k % steps_per_second == 0:
                logger.debug(
                    f"t={t:.1f}s max|z1|={np.abs(errs.z1).max():.4f} "
                    f"events={[ts.event_count for ts in triggers]}"
                )

    elapsed_ms = (time.perf_counter() - started) * 1000
    log.event_times = [list(ts.event_times) for ts in triggers]
    log.event_branches = [list(ts.event_branches) for ts in triggers]

    counts = [ts.event_count for ts in triggers]
    logger.info(f"Run {run_id} finished in {elapsed_ms / 1000:.2f}s, events per vehicle: {counts}")
    log_run_event(run_id, "finish", events=counts, wall_ms=elapsed_ms)
    log_performance(f"run_closed_loop:{run_id}", elapsed_ms)
    return log
