"""Plain two-subiteration Zhang-Suen thinning, written from the 1984 rules.

Prints the surviving pixels for the shapes frozen into test_voronoi.cpp.
"""


def thin(rows):
    img = [[1 if ch == "#" else 0 for ch in line] for line in rows]
    h, w = len(img), len(img[0])

    def px(r, c):
        return img[r][c] if 0 <= r < h and 0 <= c < w else 0

    def nbrs(r, c):
        # P2..P9 clockwise from north
        return [px(r - 1, c), px(r - 1, c + 1), px(r, c + 1), px(r + 1, c + 1),
                px(r + 1, c), px(r + 1, c - 1), px(r, c - 1), px(r - 1, c - 1)]

    changed = True
    while changed:
        changed = False
        for step in (0, 1):
            marked = []
            for r in range(h):
                for c in range(w):
                    if not img[r][c]:
                        continue
                    p = nbrs(r, c)
                    b = sum(p)
                    a = sum(1 for i in range(8) if p[i] == 0 and p[(i + 1) % 8] == 1)
                    p2, p4, p6, p8 = p[0], p[2], p[4], p[6]
                    if step == 0:
                        cond = p2 * p4 * p6 == 0 and p4 * p6 * p8 == 0
                    else:
                        cond = p2 * p4 * p8 == 0 and p2 * p6 * p8 == 0
                    if 2 <= b <= 6 and a == 1 and cond:
                        marked.append((r, c))
            for r, c in marked:
                img[r][c] = 0
            changed = changed or bool(marked)
    return [(r, c) for r in range(h) for c in range(w) if img[r][c]]


SHAPES = {
    "block5_in_9": [".........", ".........", "..#####..", "..#####..", "..#####..",
                    "..#####..", "..#####..", ".........", "........."],
    "bar3x9": ["...........", ".#########.", ".#########.", ".#########.", "..........."],
    "line": [".......", ".#####.", "......."],
}

if __name__ == "__main__":
    for name, rows in SHAPES.items():
        print(name, thin(rows))
