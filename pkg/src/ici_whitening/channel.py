"""
Geometric cluster channel.

Scatterers are fixed 2-D points, so path delays and angles evolve smoothly as
a UE moves. Every path has two segments (gNB -> scatterer -> UE). Channels
are evaluated per subcarrier from the path list:

    H_m = sum_p alpha_p exp(-j2pi f_c tau_p) exp(-j2pi f_s (m/K) tau_p) a_Nr(theta_p) a_Mt(phi_p)^H
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ici_whitening.config import SPEED_OF_LIGHT, ChannelParams, ScenarioConfig
from ici_whitening.errors import DegenerateGeometryError, EmptyChannelListError, NonPositiveDistanceError

logger = logging.getLogger(__name__)

SEGMENT_ATOL_M = 1e-6
PRECODER_NORM_TOL = 1e-9


@dataclass(frozen=True)
class ArrayGeometry:
    n_antennas: int
    spacing_over_wavelength: float = 0.5

    def __post_init__(self):
        if self.n_antennas < 1:
            raise ValueError("n_antennas must be at least 1")
        if self.spacing_over_wavelength <= 0:
            raise ValueError("spacing_over_wavelength must be positive")


@dataclass(frozen=True)
class PathRecord:
    cluster: int
    gain: complex
    delay_s: float
    aoa_rad: float
    aod_rad: float
    segment_distances_m: Tuple[float, ...]


@dataclass(frozen=True)
class LinkGeometry:
    tx_position_m: np.ndarray
    rx_position_m: np.ndarray
    scatterer_positions_m: np.ndarray  # (n_clusters, paths_per_cluster, 2)
    paths: Tuple[PathRecord, ...] = field(default=())


@dataclass(frozen=True)
class CellLayout:
    """gNB sites and UE trajectories; index 0 is the serving cell."""
    gnb_positions_m: np.ndarray  # (n_cells, 2)
    ue_start_m: np.ndarray  # (n_cells, 2)
    ue_directions: np.ndarray  # (n_cells, 2), unit vectors
    meeting_point_m: np.ndarray


def array_geometries(params: ChannelParams) -> Tuple[ArrayGeometry, ArrayGeometry]:
    """(rx, tx) arrays."""
    return (
        ArrayGeometry(params.n_rx_antennas, params.antenna_spacing),
        ArrayGeometry(params.n_tx_antennas, params.antenna_spacing),
    )


def steering_vector(geom: ArrayGeometry, angle_rad: float) -> np.ndarray:
    k = np.arange(geom.n_antennas)
    return np.exp(1j * 2.0 * np.pi * geom.spacing_over_wavelength * k * np.cos(angle_rad))


def _steering_matrix(geom: ArrayGeometry, angles: np.ndarray) -> np.ndarray:
    """Steering vectors for many angles, shape (n_angles, n_antennas)."""
    k = np.arange(geom.n_antennas)
    return np.exp(1j * 2.0 * np.pi * geom.spacing_over_wavelength * np.outer(np.cos(angles), k))


def path_gain(params: ChannelParams, segment_distances_m: Sequence[float]) -> float:
    distances = np.asarray(segment_distances_m, dtype=float)
    if distances.size == 0 or np.any(distances <= 0):
        raise NonPositiveDistanceError(f"Segment distances must be positive, got {list(distances)}")
    per_segment = np.sqrt(params.reference_loss / (4.0 * np.pi)) / distances ** (params.pathloss_exponent / 2.0)
    return float(np.prod(per_segment))


def _bearing(src: np.ndarray, dst: np.ndarray) -> float:
    d = dst - src
    return float(np.mod(np.arctan2(d[1], d[0]), 2.0 * np.pi))


def compute_paths(
    tx_position_m: np.ndarray,
    rx_position_m: np.ndarray,
    scatterer_positions_m: np.ndarray,
    params: ChannelParams,
) -> Tuple[PathRecord, ...]:
    """Recompute every path record from the point geometry."""
    records: List[PathRecord] = []
    for cluster, points in enumerate(scatterer_positions_m):
        for point in points:
            r1 = float(np.linalg.norm(point - tx_position_m))
            r2 = float(np.linalg.norm(rx_position_m - point))
            if r1 < SEGMENT_ATOL_M or r2 < SEGMENT_ATOL_M:
                raise DegenerateGeometryError(f"Scatterer at {point.tolist()} coincides with a link endpoint")
            records.append(PathRecord(
                cluster=cluster,
                gain=complex(path_gain(params, (r1, r2))),
                delay_s=(r1 + r2) / SPEED_OF_LIGHT,
                aoa_rad=_bearing(point, rx_position_m),
                aod_rad=_bearing(tx_position_m, point),
                segment_distances_m=(r1, r2),
            ))
    return tuple(records)


def make_link(tx_position_m, rx_position_m, scatterer_positions_m, params: ChannelParams) -> LinkGeometry:
    tx = np.asarray(tx_position_m, dtype=float)
    rx = np.asarray(rx_position_m, dtype=float)
    scatterers = np.asarray(scatterer_positions_m, dtype=float)
    return LinkGeometry(tx, rx, scatterers, compute_paths(tx, rx, scatterers, params))


def cell_layout(scenario: ScenarioConfig) -> CellLayout:
    """
    Serving gNB at the origin, neighbour n at 2R(cos b_n, sin b_n) with
    b_n = (n-1) pi/3. All UEs cross the meeting point M = (R, 0) at the middle
    of their trajectory. UE 1 moves along +x, from its own cell into the first
    neighbour's; neighbour UE n crosses M perpendicular to the gNB 0 -> gNB n
    axis (vertically for the first neighbour).
    """
    radius = scenario.cell_radius_m
    meeting = np.array([radius, 0.0])
    gnbs = [np.zeros(2)]
    directions = [np.array([1.0, 0.0])]
    for n in range(1, scenario.n_neighbors + 1):
        beta = (n - 1) * np.pi / 3.0
        gnbs.append(2.0 * radius * np.array([np.cos(beta), np.sin(beta)]))
        directions.append(np.array([-np.sin(beta), np.cos(beta)]))

    half_span = 0.5 * (scenario.n_positions - 1) * scenario.step_m
    directions = np.array(directions)
    starts = meeting[None, :] - half_span * directions
    return CellLayout(np.array(gnbs), starts, directions, meeting)


def ue_position(layout: CellLayout, ue: int, position: int, step_m: float) -> np.ndarray:
    return layout.ue_start_m[ue] + position * step_m * layout.ue_directions[ue]


def draw_scatterers(rng: np.random.Generator, center_m: np.ndarray, radius_m: float, params: ChannelParams) -> np.ndarray:
    """Cluster centres uniform in the cell disc, scatterers Gaussian around each centre."""
    r = radius_m * np.sqrt(rng.uniform(size=params.n_clusters))
    phi = rng.uniform(0.0, 2.0 * np.pi, size=params.n_clusters)
    centers = center_m[None, :] + np.stack([r * np.cos(phi), r * np.sin(phi)], axis=1)
    offsets = rng.normal(scale=params.scatterer_spread_m, size=(params.n_clusters, params.paths_per_cluster, 2))
    return centers[:, None, :] + offsets


def generate_drop_geometry(
    rng: np.random.Generator,
    scenario: ScenarioConfig,
    params: ChannelParams,
) -> Dict[Tuple[int, int], LinkGeometry]:
    """
    Links at trajectory start for every (gNB, UE) pair.

    Scatterers belong to the transmitting gNB's cell, so all links leaving one
    gNB share a propagation environment.
    """
    layout = cell_layout(scenario)
    n_cells = layout.gnb_positions_m.shape[0]
    scatterers = [
        draw_scatterers(rng, layout.gnb_positions_m[g], scenario.cell_radius_m, params)
        for g in range(n_cells)
    ]
    links = {}
    for g in range(n_cells):
        for ue in range(n_cells):
            links[(g, ue)] = make_link(layout.gnb_positions_m[g], layout.ue_start_m[ue], scatterers[g], params)
    logger.debug(f"Generated {len(links)} links with {params.n_clusters * params.paths_per_cluster} paths each")
    return links


def advance_ue(link: LinkGeometry, displacement_m, params: ChannelParams) -> LinkGeometry:
    rx = link.rx_position_m + np.asarray(displacement_m, dtype=float)
    return replace(link, rx_position_m=rx, paths=compute_paths(link.tx_position_m, rx, link.scatterer_positions_m, params))


def subcarrier_channels(
    link: LinkGeometry,
    geom_rx: ArrayGeometry,
    geom_tx: ArrayGeometry,
    subcarriers: Sequence[int],
    params: ChannelParams,
) -> np.ndarray:
    """Channels for several subcarriers at once, shape (len(subcarriers), N_r, M_t)."""
    m = np.asarray(subcarriers)
    if np.any(m < 0) or np.any(m >= params.total_subcarriers):
        raise ValueError(f"Subcarrier index outside [0, {params.total_subcarriers})")

    gains = np.array([p.gain for p in link.paths], dtype=np.complex128)
    delays = np.array([p.delay_s for p in link.paths])
    a_rx = _steering_matrix(geom_rx, np.array([p.aoa_rad for p in link.paths]))
    a_tx = _steering_matrix(geom_tx, np.array([p.aod_rad for p in link.paths]))

    carrier_phase = gains * np.exp(-2j * np.pi * params.carrier_hz * delays)
    freq_phase = np.exp(-2j * np.pi * params.sampling_hz * np.outer(m / params.total_subcarriers, delays))
    weights = freq_phase * carrier_phase[None, :]
    return np.einsum("mp,pr,pt->mrt", weights, a_rx, a_tx.conj())


def subcarrier_channel(
    link: LinkGeometry,
    geom_rx: ArrayGeometry,
    geom_tx: ArrayGeometry,
    m: int,
    params: ChannelParams,
) -> np.ndarray:
    return subcarrier_channels(link, geom_rx, geom_tx, [m], params)[0]


def rsrp_dbm(channels, precoder: np.ndarray, tx_power_dbm: float) -> float:
    """Transmit power plus the mean per-antenna beamformed gain over subcarriers."""
    stack = np.asarray(channels, dtype=np.complex128)
    if stack.size == 0 or len(stack) == 0:
        raise EmptyChannelListError("RSRP needs at least one subcarrier channel")
    f = np.asarray(precoder, dtype=np.complex128)
    if abs(np.linalg.norm(f) - 1.0) > PRECODER_NORM_TOL:
        raise ValueError("Precoder must have unit norm")
    if stack.ndim == 2:
        stack = stack[None, :, :]
    n_r = stack.shape[1]
    beamformed = stack @ f
    gain = float(np.mean(np.sum(np.abs(beamformed) ** 2, axis=1))) / n_r
    return tx_power_dbm + 10.0 * np.log10(gain)
