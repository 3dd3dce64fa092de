"""
Two-cell trajectory scenario.

UE 1 (served by the gNB at the origin) and the neighbour's UE walk through a
common meeting point on the cell border. At every position the serving and
interfering channels are evaluated, both gNBs precode towards their own UE
with the dominant right singular vector, and one slot of pilots and data is
synthesized for UE 1:

    y_m = sqrt(P_S) H_m f_S s + 1{ICI} sum_n sqrt(P_I) G_n,m f_n z_n + n

Only effective (precoded) channels are kept in a Drop.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ici_whitening.channel import (
    advance_ue,
    array_geometries,
    cell_layout,
    generate_drop_geometry,
    rsrp_dbm,
    subcarrier_channels,
)
from ici_whitening.config import SUBCARRIERS_PER_RB, ChannelParams, ScenarioConfig
from ici_whitening.detectors.features import featurize
from ici_whitening.errors import EmptySampleSetError, IndexOutOfRangeError
from ici_whitening.numerics import dominant_singular_triplet
from ici_whitening.seeding import as_seed, derive_rng
from ici_whitening.whitening import InterferenceNoiseSample, complex_gaussian

logger = logging.getLogger(__name__)

QPSK = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / np.sqrt(2.0)


@dataclass(frozen=True)
class Drop:
    seed: int
    cfg: ScenarioConfig
    params: ChannelParams
    serving_effective: np.ndarray  # (P, S, N_r): H_m f_S
    interfering_effective: np.ndarray  # (N_c, P, S, N_r): G_n,m f_n
    serving_precoders: np.ndarray  # (P, M_t)
    interferer_precoders: np.ndarray  # (N_c, P, M_t)
    rsrp_serving_dbm: np.ndarray  # (P,)
    rsrp_neighbor_dbm: np.ndarray  # (P,)
    ue_positions_m: np.ndarray  # (P, 2), UE 1
    flags: np.ndarray  # (P,) bool

    @property
    def n_positions(self) -> int:
        return self.serving_effective.shape[0]

    @property
    def noise_variance(self) -> float:
        return self.params.noise_variance_mw


@dataclass(frozen=True)
class Reception:
    position: int
    interfered: bool
    pilot_subcarriers: np.ndarray  # (rb N_f,)
    pilot_estimates: np.ndarray  # (rb N_f, N_r)
    u: np.ndarray  # (T_s, N_r) scaled pilot residuals
    data_subcarriers: np.ndarray  # (n_symbols,)
    tx_indices: np.ndarray  # (n_symbols,) QPSK indices
    rx_symbols: np.ndarray  # (n_symbols, N_r)

    @property
    def tx_symbols(self) -> np.ndarray:
        return QPSK[self.tx_indices]

    @property
    def u_samples(self) -> List[InterferenceNoiseSample]:
        n_sc = self.pilot_subcarriers.size
        return [
            InterferenceNoiseSample(u=row, subcarrier=int(self.pilot_subcarriers[t % n_sc]), time_index=t // n_sc)
            for t, row in enumerate(self.u)
        ]


@dataclass(frozen=True)
class LabeledSample:
    features: np.ndarray
    label: bool
    position_index: int
    rsrp_serving_dbm: float = 0.0
    rsrp_neighbor_dbm: float = 0.0
    csi_im: float = 0.0


def svd_precoder(channels) -> np.ndarray:
    """Dominant right singular vector of the subcarrier-averaged Gram matrix."""
    stack = np.asarray(channels, dtype=np.complex128)
    if stack.ndim == 2:
        stack = stack[None, :, :]
    if stack.shape[0] == 0:
        raise EmptySampleSetError("Precoder needs at least one subcarrier channel")
    gram = np.einsum("mrt,mrs->ts", stack.conj(), stack) / stack.shape[0]
    f = dominant_singular_triplet(gram).right
    return f / np.linalg.norm(f)


def pilot_subcarriers(cfg: ScenarioConfig) -> np.ndarray:
    """N_f pilot REs per RB, spaced 12/N_f apart from the first RE of each RB."""
    offsets = np.floor(np.arange(cfg.n_f_per_rb) * SUBCARRIERS_PER_RB / cfg.n_f_per_rb).astype(int)
    starts = np.arange(cfg.rb_count) * SUBCARRIERS_PER_RB
    return (starts[:, None] + offsets[None, :]).reshape(-1)


def _combined_rsrp(values_dbm: Sequence[float]) -> float:
    return float(10.0 * np.log10(np.sum(10.0 ** (np.asarray(values_dbm) / 10.0))))


def build_drop(rng: Union[int, np.random.Generator], cfg: ScenarioConfig, params: ChannelParams) -> Drop:
    """Geometry, precoders, effective channels and RSRP at every trajectory position."""
    seed = as_seed(rng)
    links = generate_drop_geometry(derive_rng(seed, "geometry"), cfg, params)
    layout = cell_layout(cfg)
    geom_rx, geom_tx = array_geometries(params)
    subcarriers = np.arange(cfg.n_subcarriers)
    n_cells = cfg.n_neighbors + 1

    n_pos = cfg.n_positions
    serving_eff = np.empty((n_pos, subcarriers.size, params.n_rx_antennas), dtype=np.complex128)
    interf_eff = np.empty((cfg.n_neighbors, n_pos, subcarriers.size, params.n_rx_antennas), dtype=np.complex128)
    f_serving = np.empty((n_pos, params.n_tx_antennas), dtype=np.complex128)
    f_interf = np.empty((cfg.n_neighbors, n_pos, params.n_tx_antennas), dtype=np.complex128)
    rsrp_s = np.empty(n_pos)
    rsrp_n = np.empty(n_pos)

    for p in range(n_pos):
        moved = {}
        for (g, ue), link in links.items():
            moved[(g, ue)] = advance_ue(link, p * cfg.step_m * layout.ue_directions[ue], params)

        h = subcarrier_channels(moved[(0, 0)], geom_rx, geom_tx, subcarriers, params)
        f_serving[p] = svd_precoder(h)
        serving_eff[p] = h @ f_serving[p]
        rsrp_s[p] = rsrp_dbm(h, f_serving[p], cfg.tx_power_serving_dbm)

        neighbor_rsrp = []
        for n in range(1, n_cells):
            own = subcarrier_channels(moved[(n, n)], geom_rx, geom_tx, subcarriers, params)
            f_interf[n - 1, p] = svd_precoder(own)
            g = subcarrier_channels(moved[(n, 0)], geom_rx, geom_tx, subcarriers, params)
            interf_eff[n - 1, p] = g @ f_interf[n - 1, p]
            neighbor_rsrp.append(rsrp_dbm(g, f_interf[n - 1, p], cfg.tx_power_interferer_dbm))
        rsrp_n[p] = _combined_rsrp(neighbor_rsrp)

    flags = np.zeros(n_pos, dtype=bool)
    flags[list(cfg.interfered_indices)] = True
    ue_positions = layout.ue_start_m[0][None, :] + np.arange(n_pos)[:, None] * cfg.step_m * layout.ue_directions[0][None, :]

    logger.debug(
        f"Built drop seed={seed}: {n_pos} positions every {cfg.sampling_period_s * 1e3:.1f} ms, "
        f"{int(flags.sum())} interfered"
    )
    return Drop(seed, cfg, params, serving_eff, interf_eff, f_serving, f_interf, rsrp_s, rsrp_n, ue_positions, flags)


def synthesize_reception(
    drop: Drop,
    position: int,
    cfg: Optional[ScenarioConfig],
    rng: Union[int, np.random.Generator],
    n_symbols: Optional[int] = None,
    interference: Optional[bool] = None,
    noise: bool = True,
) -> Reception:
    """
    One slot at a trajectory position: n_pilot_symbols pilot OFDM symbols on the
    pilot REs plus n_symbols QPSK data REs cycling over the allocated band.
    Least-squares estimates average y s* over the pilot symbols; residuals
    y - h_hat s are scaled by sqrt(P / (P - 1)) so their covariance is unbiased.
    """
    cfg = cfg or drop.cfg
    if not 0 <= position < drop.n_positions:
        raise IndexOutOfRangeError(f"Position {position} outside [0, {drop.n_positions})")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    n_symbols = cfg.symbols_per_position if n_symbols is None else n_symbols
    interfered = bool(drop.flags[position]) if interference is None else interference
    noise_var = drop.noise_variance if noise else 0.0

    amp_s = np.sqrt(10.0 ** (cfg.tx_power_serving_dbm / 10.0))
    amp_i = np.sqrt(10.0 ** (cfg.tx_power_interferer_dbm / 10.0))
    h_eff = drop.serving_effective[position]
    g_eff = drop.interfering_effective[:, position]
    n_r = h_eff.shape[1]

    def receive(subcarriers: np.ndarray, s: np.ndarray) -> np.ndarray:
        y = amp_s * h_eff[subcarriers] * s[..., None]
        if interfered:
            z = QPSK[rng.integers(0, 4, size=(g_eff.shape[0],) + s.shape)]
            y = y + amp_i * np.sum(g_eff[:, subcarriers] * z[..., None], axis=0)
        if noise_var > 0:
            y = y + complex_gaussian(rng, y.shape, noise_var)
        return y

    pilots = pilot_subcarriers(cfg)
    n_pilot = cfg.n_pilot_symbols
    pilot_idx = rng.integers(0, 4, size=(n_pilot, pilots.size))
    s_pilot = QPSK[pilot_idx]
    y_pilot = receive(np.broadcast_to(pilots, (n_pilot, pilots.size)), s_pilot)
    h_hat = np.mean(y_pilot * s_pilot.conj()[..., None], axis=0)
    residuals = (y_pilot - h_hat[None, :, :] * s_pilot[..., None]) * np.sqrt(n_pilot / (n_pilot - 1.0))

    data_sc = np.arange(n_symbols) % cfg.n_subcarriers
    tx_idx = rng.integers(0, 4, size=n_symbols)
    rx = receive(data_sc, QPSK[tx_idx]) if n_symbols else np.empty((0, n_r), dtype=np.complex128)

    return Reception(
        position=position,
        interfered=interfered,
        pilot_subcarriers=pilots,
        pilot_estimates=h_hat,
        u=residuals.reshape(-1, n_r),
        data_subcarriers=data_sc,
        tx_indices=tx_idx,
        rx_symbols=rx,
    )


def interpolate_estimates(pilots: np.ndarray, estimates: np.ndarray, n_subcarriers: int) -> np.ndarray:
    """
    Fill the full subcarrier grid from pilot estimates: linear between adjacent
    pilots, nearest pilot value beyond the band edges.
    """
    grid = np.arange(n_subcarriers)
    if pilots.size == n_subcarriers:
        return estimates.copy()
    out = np.empty((n_subcarriers, estimates.shape[1]), dtype=np.complex128)
    for r in range(estimates.shape[1]):
        out[:, r] = np.interp(grid, pilots, estimates[:, r].real) + 1j * np.interp(grid, pilots, estimates[:, r].imag)
    return out


def grid_estimates(reception: Reception, cfg: ScenarioConfig) -> np.ndarray:
    return interpolate_estimates(reception.pilot_subcarriers, reception.pilot_estimates, cfg.n_subcarriers)


def csi_im_measure(u_samples) -> float:
    """Mean per-antenna residual power, mean_t ||u_t||^2 / N_r."""
    if isinstance(u_samples, np.ndarray):
        u = np.atleast_2d(u_samples)
    else:
        u = np.array([s.u if isinstance(s, InterferenceNoiseSample) else np.asarray(s) for s in u_samples])
    if u.size == 0 or u.shape[0] == 0:
        raise EmptySampleSetError("CSI-IM needs at least one residual sample")
    return float(np.mean(np.sum(np.abs(u) ** 2, axis=1)) / u.shape[1])


def labeled_sample(drop: Drop, reception: Reception, cfg: Optional[ScenarioConfig] = None) -> LabeledSample:
    p = reception.position
    return LabeledSample(
        features=featurize(grid_estimates(reception, cfg or drop.cfg)),
        label=bool(drop.flags[p]),
        position_index=p,
        rsrp_serving_dbm=float(drop.rsrp_serving_dbm[p]),
        rsrp_neighbor_dbm=float(drop.rsrp_neighbor_dbm[p]),
        csi_im=csi_im_measure(reception.u),
    )


def make_datasets(drop: Drop, cfg: Optional[ScenarioConfig] = None) -> Dict[str, List[LabeledSample]]:
    """
    Featurized pilot-only slots at the train and test positions. Every position
    draws from its own stream keyed by (drop seed, position), so a position's
    sample does not depend on which other positions are requested.
    """
    cfg = cfg or drop.cfg
    out: Dict[str, List[LabeledSample]] = {}
    for split, indices in (("train", cfg.train_indices), ("test", cfg.test_indices)):
        samples = []
        for p in indices:
            if not 0 <= p < drop.n_positions:
                raise IndexOutOfRangeError(f"Position {p} outside [0, {drop.n_positions})")
            reception = synthesize_reception(drop, p, cfg, derive_rng(drop.seed, "dataset", p), n_symbols=0)
            samples.append(labeled_sample(drop, reception, cfg))
        out[split] = samples
    return out


def feature_matrix(samples: Sequence[LabeledSample]) -> Tuple[np.ndarray, np.ndarray]:
    return np.array([s.features for s in samples]), np.array([s.label for s in samples], dtype=bool)
