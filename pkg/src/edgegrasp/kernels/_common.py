"""Constants shared by both kernel backends."""

# face ids are per object: box faces 0..5 are (-x, +x, -y, +y, -z, +z) in the
# box frame; the cylinder has its lateral surface and its top cap
BOX_FACE_BASE = 0
CYL_SIDE = 0
CYL_CAP = 1
TABLE = -1
MISS = -2

EPS_HIT = 1e-9
