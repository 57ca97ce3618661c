import numpy as np
import pytest

from roomir.scene import TriangleMesh

BOX_QUADS = [
    (0, 3, 2, 1),  # z = lo
    (4, 5, 6, 7),  # z = hi
    (0, 1, 5, 4),  # y = lo
    (2, 3, 7, 6),  # y = hi
    (1, 2, 6, 5),  # x = hi
    (3, 0, 4, 7),  # x = lo
]


def make_box_mesh(lx, ly, lz, origin=(0.0, 0.0, 0.0), labels=None) -> TriangleMesh:
    """Closed axis-aligned box; one label per face when labels has 6 entries,
    else a single label for the whole box."""
    ox, oy, oz = origin
    corners = np.array(
        [
            [ox, oy, oz],
            [ox + lx, oy, oz],
            [ox + lx, oy + ly, oz],
            [ox, oy + ly, oz],
            [ox, oy, oz + lz],
            [ox + lx, oy, oz + lz],
            [ox + lx, oy + ly, oz + lz],
            [ox, oy + ly, oz + lz],
        ]
    )
    tris = []
    groups = []
    for f, quad in enumerate(BOX_QUADS):
        tris.append((quad[0], quad[1], quad[2]))
        tris.append((quad[0], quad[2], quad[3]))
        groups += [f, f]
    if labels is None:
        object_labels = ("box",)
        tri_group = np.zeros(len(tris), dtype=np.int64)
    elif len(labels) == 6:
        object_labels = tuple(labels)
        tri_group = np.asarray(groups, dtype=np.int64)
    else:
        object_labels = tuple(labels)
        tri_group = np.zeros(len(tris), dtype=np.int64)
    return TriangleMesh(
        vertices=corners,
        triangles=np.asarray(tris, dtype=np.int64),
        object_labels=object_labels,
        triangle_group=tri_group,
    )


CUBE_OBJ = """\
# unit cube
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
g walls
f 1 4 3 2
f 5 6 7 8
f 1 2 6 5
f 3 4 8 7
f 2 3 7 6
f 4 1 5 8
"""


@pytest.fixture
def cube_obj(tmp_path):
    path = tmp_path / "cube.obj"
    path.write_text(CUBE_OBJ)
    return path


def write_box_obj(path, lx, ly, lz, face_labels=None):
    """Write a closed box OBJ with one labeled group per face."""
    if face_labels is None:
        face_labels = [
            "wood floor",
            "plaster ceiling",
            "painted brick wall",
            "painted brick wall",
            "window glass",
            "heavy carpet",
        ]
    corners = [
        (0, 0, 0), (lx, 0, 0), (lx, ly, 0), (0, ly, 0),
        (0, 0, lz), (lx, 0, lz), (lx, ly, lz), (0, ly, lz),
    ]
    lines = [f"v {x} {y} {z}" for x, y, z in corners]
    for label, quad in zip(face_labels, BOX_QUADS):
        lines.append(f"g {label}")
        lines.append("f " + " ".join(str(i + 1) for i in quad))
    path.write_text("\n".join(lines) + "\n")
    return path


MATERIAL_CSV = """\
name,a63,a125,a250,a500,a1000,a2000,a4000,a8000
painted brick wall,0.01,0.01,0.02,0.02,0.02,0.03,0.04,0.05
heavy carpet on concrete,0.02,0.06,0.14,0.37,0.6,0.65,0.7,0.75
wood floor on joists,0.15,0.11,0.1,0.07,0.06,0.07,0.06,0.07
window glass pane,0.35,0.25,0.18,0.12,0.07,0.04,0.03,0.02
plaster on lath ceiling,0.14,0.1,0.06,0.05,0.04,0.03,0.03,0.02
"""


@pytest.fixture
def material_csv(tmp_path):
    path = tmp_path / "materials.csv"
    path.write_text(MATERIAL_CSV)
    return path
