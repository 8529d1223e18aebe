#!/usr/bin/env python3
"""Generates the bundled synthetic lane maps under maps/.

Run from the repository root:  python3 scripts/gen_maps.py
"""

import json
import math
import os

LANE_WIDTH = 3.5
ARC_SEGMENTS = 24


def r(v):
    return round(v, 6)


def pt(x, y):
    return [r(x), r(y)]


def lane(lid, centerline, limit, width=LANE_WIDTH):
    return {
        "id": lid,
        "width_m": width,
        "speed_limit_mps": limit,
        "centerline": centerline,
        "successors": [],
        "predecessors": [],
        "left_neighbor": None,
        "right_neighbor": None,
    }


def arc(center, radius, theta0, theta1, segments=ARC_SEGMENTS):
    cx, cy = center
    out = []
    for i in range(segments + 1):
        th = theta0 + (theta1 - theta0) * i / segments
        out.append(pt(cx + radius * math.cos(th), cy + radius * math.sin(th)))
    return out


def link(lanes, a, b):
    lanes[a]["successors"].append(b)
    lanes[b]["predecessors"].append(a)


def neighbors(lanes, left, right):
    lanes[left]["right_neighbor"] = right
    lanes[right]["left_neighbor"] = left


def write(name, bbox, lanes):
    bb = {"min_x": bbox[0], "min_y": bbox[1], "max_x": bbox[2], "max_y": bbox[3]}
    path = os.path.join("maps", name + ".json")
    with open(path, "w") as f:
        f.write("{\n")
        f.write(f' "name": {json.dumps(name)},\n')
        f.write(f' "bounding_box": {json.dumps(bb)},\n')
        f.write(' "lanes": [\n')
        f.write(",\n".join("  " + json.dumps(l) for l in lanes.values()))
        f.write("\n ]\n}\n")
    print(f"{path}: {len(lanes)} lanes")


def straight_corridor():
    lanes = {}
    lanes["east_left"] = lane("east_left", [pt(0, 1.75), pt(400, 1.75)], 13.89)
    lanes["east_right"] = lane("east_right", [pt(0, -1.75), pt(400, -1.75)], 13.89)
    lanes["west"] = lane("west", [pt(400, 5.25), pt(0, 5.25)], 13.89)
    neighbors(lanes, "east_left", "east_right")
    write("straight_corridor", (-10, -10, 410, 20), lanes)


def grid_3x3():
    spacing = 150.0
    half = 2 * LANE_WIDTH  # intersection box half-size == road half-width
    nodes = [(i, j) for i in range(3) for j in range(3)]

    def pos(n):
        return (n[0] * spacing, n[1] * spacing)

    def arterial(a, b):
        # middle row and middle column are faster roads
        return (a[1] == 1 and b[1] == 1) or (a[0] == 1 and b[0] == 1)

    def nid(n):
        return f"n{n[0]}{n[1]}"

    lanes = {}
    # directed road segments between adjacent nodes, two lanes each
    roads = []
    for a in nodes:
        for b in nodes:
            if abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1:
                roads.append((a, b))
    for a, b in roads:
        ax, ay = pos(a)
        bx, by = pos(b)
        dx, dy = (bx - ax) / spacing, (by - ay) / spacing
        rx, ry = dy, -dx  # right-hand normal
        limit = 16.67 if arterial(a, b) else 13.89
        for suffix, off in (("in", 0.5 * LANE_WIDTH), ("out", 1.5 * LANE_WIDTH)):
            lid = f"{nid(a)}_{nid(b)}_{suffix}"
            start = pt(ax + half * dx + off * rx, ay + half * dy + off * ry)
            end = pt(bx - half * dx + off * rx, by - half * dy + off * ry)
            lanes[lid] = lane(lid, [start, end], limit)
        neighbors(lanes, f"{nid(a)}_{nid(b)}_in", f"{nid(a)}_{nid(b)}_out")

    # intersection connectors
    for p, n in roads:
        for n2, q in roads:
            if n2 != n or q == p:
                continue
            px, py = pos(p)
            nx, ny = pos(n)
            qx, qy = pos(q)
            din = ((nx - px) / spacing, (ny - py) / spacing)
            dout = ((qx - nx) / spacing, (qy - ny) / spacing)
            cross = din[0] * dout[1] - din[1] * dout[0]
            limit = min(
                lanes[f"{nid(p)}_{nid(n)}_in"]["speed_limit_mps"],
                lanes[f"{nid(n)}_{nid(q)}_in"]["speed_limit_mps"],
            )
            if cross == 0:
                turns = [("in", "in", "s"), ("out", "out", "s")]
            elif cross < 0:
                turns = [("out", "out", "r")]
            else:
                turns = [("in", "in", "l")]
            for src_s, dst_s, kind in turns:
                src = f"{nid(p)}_{nid(n)}_{src_s}"
                dst = f"{nid(n)}_{nid(q)}_{dst_s}"
                s = lanes[src]["centerline"][-1]
                e = lanes[dst]["centerline"][0]
                cid = f"x_{nid(n)}_{nid(p)}_{nid(q)}_{src_s}"
                if kind == "s":
                    cl = [s, e]
                else:
                    # quarter arc: center is offset from the start along the turn-side normal
                    if kind == "l":
                        normal = (-din[1], din[0])
                    else:
                        normal = (din[1], -din[0])
                    radius = math.dist(s, e) / math.sqrt(2.0)
                    c = (s[0] + radius * normal[0], s[1] + radius * normal[1])
                    th0 = math.atan2(s[1] - c[1], s[0] - c[0])
                    th1 = th0 + (math.pi / 2 if kind == "l" else -math.pi / 2)
                    cl = arc(c, radius, th0, th1)
                    cl[0] = s
                    cl[-1] = e
                lanes[cid] = lane(cid, cl, limit)
                link(lanes, src, cid)
                link(lanes, cid, dst)
    write("grid_3x3", (-20, -20, 320, 320), lanes)


def loop_merge():
    lanes = {}
    w, h, rad = 300.0, 150.0, 30.0
    ring = 13.89
    lanes["ring_south"] = lane("ring_south", [pt(rad, 0), pt(w - rad, 0)], ring)
    lanes["ring_se"] = lane("ring_se", arc((w - rad, rad), rad, -math.pi / 2, 0), ring)
    lanes["ring_east"] = lane("ring_east", [pt(w, rad), pt(w, h - rad)], ring)
    lanes["ring_ne"] = lane("ring_ne", arc((w - rad, h - rad), rad, 0, math.pi / 2), ring)
    lanes["ring_north"] = lane("ring_north", [pt(w - rad, h), pt(rad, h)], ring)
    lanes["ring_nw"] = lane("ring_nw", arc((rad, h - rad), rad, math.pi / 2, math.pi), ring)
    lanes["ring_west"] = lane("ring_west", [pt(0, h - rad), pt(0, rad)], ring)
    lanes["ring_sw"] = lane("ring_sw", arc((rad, rad), rad, math.pi, 1.5 * math.pi), ring)
    order = ["ring_south", "ring_se", "ring_east", "ring_ne", "ring_north", "ring_nw", "ring_west", "ring_sw"]
    for a, b in zip(order, order[1:] + order[:1]):
        link(lanes, a, b)
    lanes["onramp"] = lane("onramp", [pt(-100, -LANE_WIDTH), pt(rad, -LANE_WIDTH)], 22.22)
    lanes["accel_lane"] = lane("accel_lane", [pt(rad, -LANE_WIDTH), pt(230, -LANE_WIDTH)], 16.67)
    link(lanes, "onramp", "accel_lane")
    neighbors(lanes, "ring_south", "accel_lane")
    write("loop_merge", (-110, -20, 310, 160), lanes)


if __name__ == "__main__":
    straight_corridor()
    grid_3x3()
    loop_merge()
