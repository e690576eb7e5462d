import numpy as np
import pytest

from evacflow.layout import ExitRun, Layout, Room, RoomFunction


def ring_walls(rows: int, cols: int) -> set:
    cells = set()
    for c in range(cols):
        cells.add((0, c))
        cells.add((rows - 1, c))
    for r in range(rows):
        cells.add((r, 0))
        cells.add((r, cols - 1))
    return cells


def rect_cells(r0, r1, c0, c1) -> frozenset:
    """Inclusive cell rectangle."""
    return frozenset((r, c) for r in range(r0, r1 + 1) for c in range(c0, c1 + 1))


def make_simple_layout(cell_size=0.5) -> Layout:
    """Two rooms over a corridor with one exit carved into the right wall.

    Grid is 9 rows x 12 cols. Rooms span rows 1-3, the corridor row 5,
    more rooms rows 6-7.
    """
    rows, cols = 9, 12
    walls = ring_walls(rows, cols)
    # wall between rooms and corridor, with door gaps
    for c in range(1, cols - 1):
        walls.add((4, c))
    walls.discard((4, 3))
    walls.discard((4, 8))
    exit_cell = (5, cols - 1)
    walls.discard(exit_cell)
    room_a = Room(rect_cells(1, 3, 1, 5), RoomFunction.ORDINARY_OFFICE)
    room_b = Room(rect_cells(1, 3, 7, 10), RoomFunction.MEETING_WITH_TABLE)
    room_c = Room(rect_cells(6, 7, 1, 4), RoomFunction.MEETING_NO_TABLE)
    return Layout(
        width_m=cols * cell_size,
        height_m=rows * cell_size,
        cell_size_m=cell_size,
        wall_cells=frozenset(walls),
        rooms=(room_a, room_b, room_c),
        exits=(ExitRun(cells=(exit_cell,)),),
    )


def make_corridor_layout(n_cells: int, cell_size=1.0) -> Layout:
    """A straight corridor of ``n_cells`` walkable cells; the first one is
    the exit, carved into the left wall ring."""
    rows, cols = 3, n_cells + 1
    walls = ring_walls(rows, cols)
    walls.discard((1, 0))
    return Layout(
        width_m=cols * cell_size,
        height_m=rows * cell_size,
        cell_size_m=cell_size,
        wall_cells=frozenset(walls),
        rooms=(),
        exits=(ExitRun(cells=((1, 0),)),),
    )


def random_mini_layout(rng: np.random.Generator, cell_size=0.5) -> Layout:
    """Small randomized layout: ring walls, a corridor band, random rooms."""
    rows = int(rng.integers(9, 14))
    cols = int(rng.integers(12, 18))
    walls = ring_walls(rows, cols)
    corridor_row = rows // 2
    for c in range(1, cols - 1):
        walls.add((corridor_row - 1, c))
    functions = [
        RoomFunction.ORDINARY_OFFICE,
        RoomFunction.MEETING_WITH_TABLE,
        RoomFunction.MEETING_NO_TABLE,
        RoomFunction.EXHIBITION_HALL,
        RoomFunction.OTHER_REGION,
    ]
    rooms = []
    # rooms above the corridor wall, split by a random partition
    splits = sorted(rng.choice(np.arange(3, cols - 3), size=2, replace=False))
    bounds = [1, int(splits[0]), int(splits[1]), cols - 1]
    for i in range(3):
        c0, c1 = bounds[i], bounds[i + 1] - 1
        if c1 < c0:
            continue
        fn = functions[int(rng.integers(len(functions)))]
        rooms.append(Room(rect_cells(1, corridor_row - 2, c0, c1), fn))
        walls.discard((corridor_row - 1, int(rng.integers(c0, c1 + 1))))
    exit_cell = (corridor_row, cols - 1)
    walls.discard(exit_cell)
    return Layout(
        width_m=cols * cell_size,
        height_m=rows * cell_size,
        cell_size_m=cell_size,
        wall_cells=frozenset(walls),
        rooms=tuple(rooms),
        exits=(ExitRun(cells=(exit_cell,)),),
    )


@pytest.fixture
def simple_layout():
    return make_simple_layout()


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """Small on-disk dataset shared by training/service/CLI tests."""
    from evacflow.dataset import build_dataset

    out = tmp_path_factory.mktemp("tinyds")
    return build_dataset(out, n_base=10, augment_factor=2, image_size=32, seed=77)


@pytest.fixture(scope="session")
def micro_diffusion(tiny_dataset):
    """A barely-trained diffusion model: wiring-level fidelity only."""
    from evacflow.diffusion import (
        DenoiserConfig,
        TrainingConfig,
        make_rescaled_schedule,
        train,
    )

    dcfg = DenoiserConfig(image_size=32, base_width=8, depth=2, time_embedding_dim=16)
    tcfg = TrainingConfig(
        learning_rate=0.001,
        epochs=4,
        batch_size=8,
        validation_interval_epochs=2,
        val_items=1,
        seed=3,
    )
    return train(tiny_dataset, dcfg, tcfg, schedule=make_rescaled_schedule(12))


@pytest.fixture(scope="session")
def micro_baseline(tiny_dataset):
    from evacflow.baselines import RegressorConfig, train_baseline
    from evacflow.diffusion import TrainingConfig

    cfg = RegressorConfig(image_size=32, base_width=8, depth=2)
    tcfg = TrainingConfig(
        learning_rate=0.001,
        epochs=4,
        batch_size=8,
        validation_interval_epochs=2,
        seed=3,
    )
    return train_baseline(tiny_dataset, cfg, tcfg)
