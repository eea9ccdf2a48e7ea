#!/usr/bin/env python3
"""Regenerates testdata/golden: icon-like SVGs exercising the supported subset.

Output is deterministic for a given seed. Run from the repository root:

    python3 scripts/gen_golden.py
"""

import math
import os
import random

OUT = os.path.join(os.path.dirname(__file__), "..", "testdata", "golden")
COUNT = 120
SEED = 20240501

PALETTE = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "black", "white", "navy",
    "teal", "gold", "crimson", "#333", "rgb(40,160,90)",
]

VIEWBOXES = [(0, 0, 24, 24), (0, 0, 100, 100), (0, 0, 64, 48), (-10, -10, 120, 80), (0, 0, 32, 48)]


def f(v):
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


class Gen:
    def __init__(self, rng, vb):
        self.rng = rng
        self.vb = vb
        self.defs = []
        self.ids = 0

    def fresh(self, prefix):
        self.ids += 1
        return f"{prefix}{self.ids}"

    def pt(self):
        x, y, w, h = self.vb
        return x + self.rng.uniform(0.05, 0.95) * w, y + self.rng.uniform(0.05, 0.95) * h

    def size(self, lo=0.05, hi=0.4):
        return self.rng.uniform(lo, hi) * min(self.vb[2], self.vb[3])

    def color(self):
        return self.rng.choice(PALETTE)

    def gradient(self):
        gid = self.fresh("g")
        stops = "".join(
            f'<stop offset="{f(o)}" stop-color="{self.color()}"'
            + (f' stop-opacity="{f(self.rng.uniform(0.3, 1))}"' if self.rng.random() < 0.2 else "")
            + "/>"
            for o in sorted(self.rng.uniform(0, 1) for _ in range(self.rng.randint(2, 4)))
        )
        spread = self.rng.choice(["", "", ' spreadMethod="reflect"', ' spreadMethod="repeat"'])
        if self.rng.random() < 0.5:
            attrs = f'x1="{f(self.rng.random())}" y1="{f(self.rng.random())}" x2="{f(self.rng.random())}" y2="{f(self.rng.random())}"'
            self.defs.append(f'<linearGradient id="{gid}" {attrs}{spread}>{stops}</linearGradient>')
        elif self.rng.random() < 0.5:
            self.defs.append(f'<radialGradient id="{gid}" r="{f(self.rng.uniform(0.3, 0.7))}" fx="0.35" fy="0.35"{spread}>{stops}</radialGradient>')
        else:
            x, y, w, h = self.vb
            self.defs.append(
                f'<linearGradient id="{gid}" gradientUnits="userSpaceOnUse" x1="{f(x)}" y1="{f(y)}" x2="{f(x + w)}" y2="{f(y + h)}"'
                f' gradientTransform="rotate({f(self.rng.uniform(-30, 30))})"{spread}>{stops}</linearGradient>'
            )
        return f"url(#{gid})"

    def paint(self):
        r = self.rng.random()
        if r < 0.12:
            return self.gradient()
        return self.color()

    def style(self, stroke_ok=True):
        parts = []
        r = self.rng.random()
        if r < 0.6:
            parts.append(f'fill="{self.paint()}"')
        elif r < 0.7:
            parts.append('fill="none"')
        if stroke_ok and (self.rng.random() < 0.35 or 'fill="none"' in parts):
            parts.append(f'stroke="{self.paint() if self.rng.random() < 0.9 else self.color()}"')
            parts.append(f'stroke-width="{f(self.size(0.01, 0.06))}"')
            if self.rng.random() < 0.4:
                parts.append(f'stroke-linejoin="{self.rng.choice(["round", "bevel", "miter"])}"')
            if self.rng.random() < 0.4:
                parts.append(f'stroke-linecap="{self.rng.choice(["round", "square", "butt"])}"')
        if self.rng.random() < 0.15:
            parts.append(f'fill-opacity="{f(self.rng.uniform(0.3, 0.9))}"')
        if self.rng.random() < 0.1:
            parts.append(f'opacity="{f(self.rng.uniform(0.4, 0.9))}"')
        if self.rng.random() < 0.1:
            parts.append('fill-rule="evenodd"')
        return " ".join(parts)

    def transform(self):
        r = self.rng.random()
        cx, cy = self.pt()
        if r < 0.15:
            return f' transform="rotate({f(self.rng.uniform(-60, 60))} {f(cx)} {f(cy)})"'
        if r < 0.22:
            return f' transform="translate({f(self.size(0, 0.1))},{f(self.size(0, 0.1))}) scale({f(self.rng.uniform(0.6, 1.2))})"'
        if r < 0.26:
            return f' transform="skewX({f(self.rng.uniform(-20, 20))})"'
        return ""

    def shape(self):
        kind = self.rng.choice(["rect", "rect", "circle", "ellipse", "line", "polyline", "polygon", "path", "path", "path"])
        st = self.style(stroke_ok=True)
        tr = self.transform()
        if kind == "rect":
            x, y = self.pt()
            w, h = self.size(), self.size()
            rx = f' rx="{f(self.size(0.01, 0.08))}"' if self.rng.random() < 0.4 else ""
            return f'<rect x="{f(x - w / 2)}" y="{f(y - h / 2)}" width="{f(w)}" height="{f(h)}"{rx} {st}{tr}/>'
        if kind == "circle":
            x, y = self.pt()
            return f'<circle cx="{f(x)}" cy="{f(y)}" r="{f(self.size(0.03, 0.3))}" {st}{tr}/>'
        if kind == "ellipse":
            x, y = self.pt()
            return f'<ellipse cx="{f(x)}" cy="{f(y)}" rx="{f(self.size())}" ry="{f(self.size())}" {st}{tr}/>'
        if kind == "line":
            (x1, y1), (x2, y2) = self.pt(), self.pt()
            sw = f(self.size(0.01, 0.05))
            cap = self.rng.choice(["butt", "round", "square"])
            return f'<line x1="{f(x1)}" y1="{f(y1)}" x2="{f(x2)}" y2="{f(y2)}" stroke="{self.color()}" stroke-width="{sw}" stroke-linecap="{cap}"{tr}/>'
        if kind in ("polyline", "polygon"):
            pts = " ".join(f"{f(x)},{f(y)}" for x, y in (self.pt() for _ in range(self.rng.randint(3, 7))))
            if kind == "polyline":
                sw = f(self.size(0.01, 0.05))
                j = self.rng.choice(["miter", "round", "bevel"])
                return f'<polyline points="{pts}" fill="none" stroke="{self.color()}" stroke-width="{sw}" stroke-linejoin="{j}"{tr}/>'
            return f'<polygon points="{pts}" {st}{tr}/>'
        return f'<path d="{self.path_data()}" {st}{tr}/>'

    def path_data(self):
        x, y = self.pt()
        d = [f"M{f(x)} {f(y)}"]
        for _ in range(self.rng.randint(2, 6)):
            c = self.rng.choice("LCQASHVT")
            nx, ny = self.pt()
            if c == "L":
                d.append(f"L{f(nx)} {f(ny)}")
            elif c == "H":
                d.append(f"H{f(nx)}")
            elif c == "V":
                d.append(f"V{f(ny)}")
            elif c == "C":
                (ax, ay), (bx, by) = self.pt(), self.pt()
                d.append(f"C{f(ax)} {f(ay)} {f(bx)} {f(by)} {f(nx)} {f(ny)}")
            elif c == "S":
                bx, by = self.pt()
                d.append(f"S{f(bx)} {f(by)} {f(nx)} {f(ny)}")
            elif c == "Q":
                ax, ay = self.pt()
                d.append(f"Q{f(ax)} {f(ay)} {f(nx)} {f(ny)}")
            elif c == "T":
                d.append(f"T{f(nx)} {f(ny)}")
            else:
                r1, r2 = self.size(0.1, 0.4), self.size(0.1, 0.4)
                d.append(f"A{f(r1)} {f(r2)} {f(self.rng.uniform(0, 90))} {self.rng.randint(0, 1)} {self.rng.randint(0, 1)} {f(nx)} {f(ny)}")
        if self.rng.random() < 0.3:
            d.append(f"m{f(self.size(0, 0.1))} {f(self.size(0, 0.1))}l{f(self.size(0.05, 0.1))} 0l0 {f(self.size(0.05, 0.1))}z")
        elif self.rng.random() < 0.6:
            d.append("Z")
        return "".join(d)

    def clip(self):
        cid = self.fresh("c")
        x, y = self.pt()
        if self.rng.random() < 0.5:
            body = f'<circle cx="{f(x)}" cy="{f(y)}" r="{f(self.size(0.2, 0.45))}"/>'
        else:
            w, h = self.size(0.3, 0.7), self.size(0.3, 0.7)
            body = f'<rect x="{f(x - w / 2)}" y="{f(y - h / 2)}" width="{f(w)}" height="{f(h)}"/>'
        self.defs.append(f'<clipPath id="{cid}">{body}</clipPath>')
        return f' clip-path="url(#{cid})"'

    def group(self, depth):
        items = []
        for _ in range(self.rng.randint(1, 4)):
            if depth < 3 and self.rng.random() < 0.25:
                items.append(self.group(depth + 1))
            else:
                items.append(self.shape())
        attrs = ""
        if self.rng.random() < 0.5:
            attrs += f' fill="{self.color()}"'
        if self.rng.random() < 0.3:
            attrs += f' stroke="{self.color()}" stroke-width="{f(self.size(0.01, 0.04))}"'
        attrs += self.transform()
        return f"<g{attrs}>{''.join(items)}</g>"


def document(rng, idx):
    vb = rng.choice(VIEWBOXES)
    g = Gen(rng, vb)
    body = []
    x, y, w, h = vb
    if rng.random() < 0.4:
        body.append(f'<rect x="{f(x)}" y="{f(y)}" width="{f(w)}" height="{f(h)}" fill="{g.color()}"/>')
    for _ in range(rng.randint(2, 9)):
        r = rng.random()
        if r < 0.2:
            body.append(g.group(1))
        elif r < 0.27:
            # Clip on a single element, or on a group of primitives.
            clip = g.clip()
            if rng.random() < 0.5:
                shape = g.shape()
                body.append(shape.replace("/>", clip + "/>", 1) if "clip-path" not in shape else shape)
            else:
                body.append(f"<g{clip}>{g.shape()}{g.shape()}</g>")
        elif r < 0.33:
            sid = g.fresh("s")
            shape = g.shape()
            tag_end = shape.index(" ")
            shape = shape[:tag_end] + f' id="{sid}"' + shape[tag_end:]
            g.defs.append(shape)
            for _ in range(rng.randint(1, 3)):
                body.append(f'<use href="#{sid}" x="{f(g.size(-0.2, 0.2))}" y="{f(g.size(-0.2, 0.2))}"/>')
        elif r < 0.36:
            # Group opacity over non-overlapping children.
            cx, cy = g.pt()
            s = g.size(0.05, 0.12)
            body.append(
                f'<g opacity="{f(rng.uniform(0.4, 0.8))}"><rect x="{f(cx - 2.2 * s)}" y="{f(cy - s)}" width="{f(2 * s)}" height="{f(2 * s)}" fill="{g.color()}"/>'
                f'<circle cx="{f(cx + 1.2 * s)}" cy="{f(cy)}" r="{f(s)}" fill="{g.color()}"/></g>'
            )
        elif r < 0.39:
            body.append(f'<path style="fill:{g.color()};stroke:{g.color()};stroke-width:{f(g.size(0.01, 0.03))}" d="{g.path_data()}"/>')
        elif r < 0.41:
            body.append(f'<g color="{g.color()}"><circle cx="{f(g.pt()[0])}" cy="{f(g.pt()[1])}" r="{f(g.size(0.05, 0.2))}" fill="currentColor"/></g>')
        else:
            body.append(g.shape())
    defs = f"<defs>{''.join(g.defs)}</defs>" if g.defs else ""
    head = f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{" ".join(f(v) for v in vb)}"'
    if rng.random() < 0.3:
        head += f' width="{f(w * 2)}" height="{f(h * 2)}"'
    comment = "<!-- generated icon -->" if idx % 7 == 0 else ""
    title = f"<title>icon {idx}</title>" if idx % 5 == 0 else ""
    return f'{head}>{comment}{title}\n  {defs}\n  ' + "\n  ".join(body) + "\n</svg>\n"


# Hand-written cases for features the random generator rarely combines.
FIXED = {
    "feature_href_gradient": """<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" viewBox="0 0 48 48">
  <defs>
    <linearGradient id="base"><stop offset="0" stop-color="#fc0"/><stop offset=".5" stop-color="#f60"/><stop offset="1" stop-color="#903"/></linearGradient>
    <radialGradient id="ball" xlink:href="#base" cx="40%" cy="35%" r="60%"/>
    <linearGradient id="band" href="#base" x1="0" y1="0" x2="0" y2="1" spreadMethod="reflect"/>
  </defs>
  <rect x="2" y="30" width="44" height="14" rx="3" fill="url(#band)"/>
  <circle cx="24" cy="20" r="14" fill="url(#ball)" stroke="#421" stroke-width="1.5"/>
</svg>
""",
    "feature_percent_lengths": """<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 200 100">
  <rect x="10%" y="10%" width="80%" height="80%" fill="#eef" stroke="#447" stroke-width="1%"/>
  <circle cx="50%" cy="50%" r="20%" fill="#88c"/>
  <line x1="0" y1="100%" x2="100%" y2="0" stroke="#c33" stroke-width="3" stroke-linecap="round"/>
</svg>
""",
    "feature_evenodd_star": """<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 100 100">
  <path d="M50 5L61 40H98L68 62L79 96L50 75L21 96L32 62L2 40H39Z" fill="#e5b000" fill-rule="evenodd" stroke="#a70" stroke-width="2" stroke-linejoin="round"/>
  <path d="M20 20h60v60h-60zM35 35v30h30v-30z" fill="#369" fill-opacity=".4" fill-rule="evenodd"/>
</svg>
""",
    "feature_nested_transforms": """<svg xmlns="http://www.w3.org/2000/svg" viewBox="-50 -50 100 100">
  <g transform="rotate(15)">
    <g transform="scale(1.2 .8)">
      <g transform="matrix(1 .2 0 1 4 -3)" fill="#2a9" stroke="#063" stroke-width="1.2">
        <rect x="-30" y="-20" width="25" height="18"/>
        <ellipse cx="10" cy="8" rx="16" ry="9"/>
        <polygon points="-20,10 -5,30 -30,28"/>
      </g>
    </g>
  </g>
</svg>
""",
    "feature_use_chain": """<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 60 30">
  <defs>
    <g id="pip"><circle r="3"/><circle r="1.5" fill="white"/></g>
    <g id="row"><use href="#pip" x="5"/><use href="#pip" x="15"/><use href="#pip" x="25"/></g>
  </defs>
  <use href="#row" y="8" fill="#c22"/>
  <use href="#row" x="25" y="20" fill="#22c" transform="rotate(5 30 20)"/>
</svg>
""",
    "feature_clip_group": """<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 64 64">
  <clipPath id="disk"><circle cx="32" cy="32" r="24"/></clipPath>
  <g clip-path="url(#disk)" transform="translate(2 1)">
    <rect width="64" height="32" fill="#4a90d9"/>
    <rect y="32" width="64" height="32" fill="#7ed321"/>
    <path d="M0 40 Q16 28 32 40 T64 40" fill="none" stroke="white" stroke-width="3"/>
  </g>
  <circle cx="34" cy="33" r="24" fill="none" stroke="#333" stroke-width="2"/>
</svg>
""",
    "feature_caps_joins": """<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 120 60">
  <g fill="none" stroke="#345" stroke-width="6">
    <polyline points="10,50 25,10 40,50" stroke-linejoin="miter"/>
    <polyline points="50,50 65,10 80,50" stroke-linejoin="round"/>
    <polyline points="90,50 105,10 118,50" stroke-linejoin="bevel"/>
  </g>
  <g stroke="#c50" stroke-width="4">
    <line x1="10" y1="55" x2="30" y2="55" stroke-linecap="butt"/>
    <line x1="50" y1="55" x2="70" y2="55" stroke-linecap="round"/>
    <line x1="90" y1="55" x2="110" y2="55" stroke-linecap="square"/>
  </g>
  <path d="M60 30h0" stroke="#090" stroke-width="8" stroke-linecap="round"/>
</svg>
""",
    "feature_style_attribute": """<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 40 40" width="80" height="80">
  <g style="fill:#936;stroke:#222;stroke-width:.8">
    <rect x="4" y="4" width="14" height="14" rx="2" style="fill:#f9c"/>
    <rect x="22" y="4" width="14" height="14" ry="7" fill="#9cf" style="opacity:.7"/>
    <circle cx="20" cy="29" r="8" visibility="hidden"/>
    <circle cx="20" cy="29" r="6"/>
  </g>
</svg>
""",
}


def main():
    rng = random.Random(SEED)
    os.makedirs(OUT, exist_ok=True)
    for i in range(COUNT):
        with open(os.path.join(OUT, f"icon_{i:03d}.svg"), "w") as fh:
            fh.write(document(rng, i))
    for name, text in FIXED.items():
        with open(os.path.join(OUT, f"{name}.svg"), "w") as fh:
            fh.write(text)


if __name__ == "__main__":
    main()
