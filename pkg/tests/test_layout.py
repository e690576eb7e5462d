import json

import numpy as np
import pytest

from evacflow import layout as lay
from evacflow.errors import (
    AugmentationUnavailableError,
    InvalidLayoutError,
    LayoutSchemaError,
)
from evacflow.layout import (
    ExitRun,
    FeatureTensor,
    Layout,
    PALETTE_V1,
    Room,
    RoomFunction,
    augment,
    decode_rgb,
    density_of,
    encode_features,
    layout_from_json,
    layout_to_json,
    occupants_in_room,
    rasterize_rgb,
)

from conftest import make_simple_layout, random_mini_layout, rect_cells, ring_walls

TABLE_DENSITIES = {
    RoomFunction.ORDINARY_OFFICE: 6.0,
    RoomFunction.MEETING_WITH_TABLE: 2.0,
    RoomFunction.MEETING_NO_TABLE: 1.0,
    RoomFunction.EXHIBITION_HALL: 1.43,
    RoomFunction.OTHER_REGION: 9.0,
    RoomFunction.CORRIDOR_RESTROOM: 0.0,
    RoomFunction.EXIT_STAIRS: 0.0,
    RoomFunction.EXIT_DOOR: 0.0,
}


def test_density_table_complete_and_exact():
    for fn, expected in TABLE_DENSITIES.items():
        assert density_of(fn) == expected


@pytest.mark.parametrize(
    "area,function,expected",
    [
        (12.0, RoomFunction.ORDINARY_OFFICE, 2),
        (100.0, RoomFunction.CORRIDOR_RESTROOM, 0),
        (5.0, RoomFunction.ORDINARY_OFFICE, 1),  # min-one rule
        (0.0, RoomFunction.MEETING_NO_TABLE, 1),
        (10.0, RoomFunction.EXHIBITION_HALL, 6),  # floor(10/1.43) = 6
        (3.0, RoomFunction.EXIT_DOOR, 0),
    ],
)
def test_occupants_in_room(area, function, expected):
    assert occupants_in_room(area, function) == expected


def test_occupants_rejects_negative_area():
    with pytest.raises(ValueError):
        occupants_in_room(-1.0, RoomFunction.ORDINARY_OFFICE)


class TestFeatureEncoding:
    def test_wall_cell_is_obstacle_only(self, simple_layout):
        ft = encode_features(simple_layout, 36, 48)
        # top-left corner maps onto the wall ring
        assert tuple(ft.data[:, 0, 0]) == (1.0, 0.0, 0.0)

    def test_corridor_cell_all_zero(self, simple_layout):
        ft = encode_features(simple_layout, 36, 48)
        # row 5 of 9 -> pixel row 5*4+1; col 6 is corridor
        assert tuple(ft.data[:, 22, 26]) == (0.0, 0.0, 0.0)

    def test_meeting_no_table_density_is_one(self):
        base = make_simple_layout()
        ft = encode_features(base, 36, 48)
        # room C (meeting, no table) spans rows 6-7, cols 1-4
        r, c = 6 * 4 + 1, 2 * 4
        assert ft.data[FeatureTensor.DENSITY, r, c] == 1.0
        assert ft.data[FeatureTensor.OBSTACLE, r, c] == 0.0

    def test_invariants_on_random_layouts(self):
        for seed in range(8):
            lt = random_mini_layout(np.random.default_rng(seed))
            ft = encode_features(lt, 40, 40)
            ft.validate()

    def test_exit_channel_marks_exit(self, simple_layout):
        ft = encode_features(simple_layout, 36, 48)
        assert ft.data[FeatureTensor.EXIT].sum() > 0
        ft.validate()

    def test_rejects_small_raster(self, simple_layout):
        with pytest.raises(ValueError):
            encode_features(simple_layout, 16, 16)

    def test_rejects_layout_without_walkable_cells(self):
        rows, cols = 4, 4
        all_cells = frozenset((r, c) for r in range(rows) for c in range(cols))
        bad = Layout(
            width_m=2,
            height_m=2,
            cell_size_m=0.5,
            wall_cells=all_cells,
            rooms=(),
            exits=(ExitRun(cells=((1, 1),)),),
        )
        with pytest.raises(InvalidLayoutError):
            encode_features(bad, 32, 32)

    def test_density_override(self, simple_layout):
        ft = encode_features(
            simple_layout,
            36,
            48,
            density_overrides={RoomFunction.ORDINARY_OFFICE: 3.0},
        )
        r, c = 2 * 4, 3 * 4  # inside room A
        assert ft.data[FeatureTensor.DENSITY, r, c] == pytest.approx(1 / 3)


class TestRgbRasterization:
    def test_palette_closure_single_room(self, simple_layout):
        img = rasterize_rgb(simple_layout, 36, 48)
        seen = {tuple(px) for px in img.reshape(-1, 3)}
        allowed = set(PALETTE_V1.colors.values())
        assert seen <= allowed

    def test_round_trip_on_random_layouts(self):
        for seed in range(10):
            lt = random_mini_layout(np.random.default_rng(100 + seed))
            rows, cols = lt.grid_shape
            img = rasterize_rgb(lt, rows, cols)
            assert np.array_equal(decode_rgb(img), lt.cell_kind_grid())

    def test_walls_only_layout_has_no_room_colors(self):
        rows, cols = 8, 8
        walls = ring_walls(rows, cols)
        walls.discard((1, 0))
        lt = Layout(
            width_m=4,
            height_m=4,
            cell_size_m=0.5,
            wall_cells=frozenset(walls),
            rooms=(),
            exits=(ExitRun(cells=((1, 0),)),),
        )
        img = rasterize_rgb(lt, 32, 32)
        seen = {tuple(px) for px in img.reshape(-1, 3)}
        room_colors = {
            PALETTE_V1.color_of_function(fn) for fn in lay.OCCUPIABLE_FUNCTIONS
        }
        assert not (seen & room_colors)

    def test_decode_rejects_foreign_color(self):
        img = np.full((4, 4, 3), 17, dtype=np.uint8)
        with pytest.raises(ValueError):
            decode_rgb(img)

    def test_palette_is_injective_and_versioned(self):
        assert PALETTE_V1.version == 1
        colors = list(PALETTE_V1.colors.values())
        assert len(set(colors)) == len(colors)


class TestAugment:
    def test_deterministic(self, simple_layout):
        a = augment(simple_layout, 4, seed=7)
        b = augment(simple_layout, 4, seed=7)
        assert a == b

    def test_geometry_channels_unchanged(self, simple_layout):
        base_ft = encode_features(simple_layout, 36, 48)
        for variant in augment(simple_layout, 5, seed=3):
            vft = encode_features(variant, 36, 48)
            assert np.array_equal(
                vft.data[FeatureTensor.OBSTACLE], base_ft.data[FeatureTensor.OBSTACLE]
            )
            assert np.array_equal(
                vft.data[FeatureTensor.EXIT], base_ft.data[FeatureTensor.EXIT]
            )

    def test_density_channel_changes(self, simple_layout):
        base_ft = encode_features(simple_layout, 36, 48)
        for variant in augment(simple_layout, 5, seed=3):
            vft = encode_features(variant, 36, 48)
            delta = np.abs(
                vft.data[FeatureTensor.DENSITY] - base_ft.data[FeatureTensor.DENSITY]
            ).sum()
            assert delta > 0

    def test_at_least_two_rooms_differ(self, simple_layout):
        for variant in augment(simple_layout, 8, seed=11):
            changed = sum(
                1
                for a, b in zip(simple_layout.rooms, variant.rooms)
                if a.function is not b.function
            )
            assert changed >= 2

    def test_unavailable_with_one_reassignable_room(self):
        rows, cols = 8, 10
        walls = ring_walls(rows, cols)
        walls.discard((3, 0))
        lt = Layout(
            width_m=5,
            height_m=4,
            cell_size_m=0.5,
            wall_cells=frozenset(walls),
            rooms=(Room(rect_cells(1, 2, 1, 4), RoomFunction.ORDINARY_OFFICE),),
            exits=(ExitRun(cells=((3, 0),)),),
        )
        with pytest.raises(AugmentationUnavailableError):
            augment(lt, 2, seed=0)

    def test_variant_count_bounds(self, simple_layout):
        with pytest.raises(ValueError):
            augment(simple_layout, 0, seed=0)
        with pytest.raises(ValueError):
            augment(simple_layout, 9, seed=0)


class TestLayoutValidation:
    def test_overlapping_rooms_rejected(self):
        rows, cols = 8, 10
        walls = ring_walls(rows, cols)
        walls.discard((3, 0))
        lt = Layout(
            width_m=5,
            height_m=4,
            cell_size_m=0.5,
            wall_cells=frozenset(walls),
            rooms=(
                Room(rect_cells(1, 2, 1, 4), RoomFunction.ORDINARY_OFFICE),
                Room(rect_cells(2, 3, 3, 6), RoomFunction.OTHER_REGION),
            ),
            exits=(ExitRun(cells=((3, 0),)),),
        )
        with pytest.raises(InvalidLayoutError):
            lt.validate()

    def test_no_exit_rejected(self, simple_layout):
        from dataclasses import replace

        with pytest.raises(InvalidLayoutError):
            replace(simple_layout, exits=()).validate()

    def test_interior_exit_rejected(self, simple_layout):
        from dataclasses import replace

        bad = replace(simple_layout, exits=(ExitRun(cells=((5, 5),)),))
        with pytest.raises(InvalidLayoutError):
            bad.validate()


class TestJsonSchema:
    def test_round_trip(self, simple_layout):
        doc = layout_to_json(simple_layout)
        again = layout_from_json(json.loads(json.dumps(doc)))
        assert again.wall_cells == simple_layout.wall_cells
        assert again.rooms == simple_layout.rooms
        assert again.exits == simple_layout.exits
        assert again.footprint == simple_layout.footprint

    def test_rejects_unknown_version(self, simple_layout):
        doc = layout_to_json(simple_layout)
        doc["schema_version"] = 99
        with pytest.raises(LayoutSchemaError):
            layout_from_json(doc)

    def test_rejects_malformed(self):
        with pytest.raises(LayoutSchemaError):
            layout_from_json({"schema_version": 1})
        with pytest.raises(LayoutSchemaError):
            layout_from_json([1, 2, 3])

    def test_rejects_invalid_geometry(self, simple_layout):
        doc = layout_to_json(simple_layout)
        doc["exits"] = []
        with pytest.raises(LayoutSchemaError):
            layout_from_json(doc)


def test_container_round_trip(tmp_path):
    from evacflow.container import read_tensor, write_tensor

    arr = np.random.default_rng(0).normal(size=(3, 7, 5)).astype(np.float32)
    path = tmp_path / "t.bin"
    write_tensor(path, arr)
    back = read_tensor(path)
    assert back.shape == (3, 7, 5)
    assert np.array_equal(back, arr)


def test_container_rejects_truncated(tmp_path):
    from evacflow.container import read_tensor, write_tensor

    path = tmp_path / "t.bin"
    write_tensor(path, np.zeros((2, 4, 4), dtype=np.float32))
    data = path.read_bytes()
    path.write_bytes(data[:-3])
    with pytest.raises(ValueError):
        read_tensor(path)
