use crate::geom::Point;

/// One absolute path command. Relative, horizontal/vertical and smooth
/// forms are expanded when the `d` attribute is parsed.
#[derive(Debug, Clone, PartialEq)]
pub enum PathCmd {
    MoveTo(Point),
    LineTo(Point),
    CubicTo(Point, Point, Point),
    QuadTo(Point, Point),
    ArcTo { rx: f64, ry: f64, x_axis_rotation: f64, large_arc: bool, sweep: bool, to: Point },
    Close,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathData(pub Vec<PathCmd>);

impl PathData {
    /// Parses SVG path syntax. As renderers do, a syntax error truncates the
    /// path at the last valid segment rather than rejecting it.
    pub fn parse(d: &str) -> PathData {
        use svgtypes::PathSegment as S;

        let mut cmds = Vec::new();
        let mut cur = Point::default();
        let mut start = Point::default();
        // Reflection source for S/T: the previous command's last control point.
        let mut last_cubic_ctrl: Option<Point> = None;
        let mut last_quad_ctrl: Option<Point> = None;

        for seg in svgtypes::PathParser::from(d) {
            let Ok(seg) = seg else { break };
            let rel = |abs: bool, x: f64, y: f64| if abs { Point::new(x, y) } else { Point::new(cur.x + x, cur.y + y) };
            let mut cubic_ctrl = None;
            let mut quad_ctrl = None;
            match seg {
                S::MoveTo { abs, x, y } => {
                    cur = rel(abs, x, y);
                    start = cur;
                    cmds.push(PathCmd::MoveTo(cur));
                }
                S::LineTo { abs, x, y } => {
                    cur = rel(abs, x, y);
                    cmds.push(PathCmd::LineTo(cur));
                }
                S::HorizontalLineTo { abs, x } => {
                    cur = Point::new(if abs { x } else { cur.x + x }, cur.y);
                    cmds.push(PathCmd::LineTo(cur));
                }
                S::VerticalLineTo { abs, y } => {
                    cur = Point::new(cur.x, if abs { y } else { cur.y + y });
                    cmds.push(PathCmd::LineTo(cur));
                }
                S::CurveTo { abs, x1, y1, x2, y2, x, y } => {
                    let c1 = rel(abs, x1, y1);
                    let c2 = rel(abs, x2, y2);
                    cur = rel(abs, x, y);
                    cmds.push(PathCmd::CubicTo(c1, c2, cur));
                    cubic_ctrl = Some(c2);
                }
                S::SmoothCurveTo { abs, x2, y2, x, y } => {
                    let c1 = reflect(last_cubic_ctrl, cur);
                    let c2 = rel(abs, x2, y2);
                    cur = rel(abs, x, y);
                    cmds.push(PathCmd::CubicTo(c1, c2, cur));
                    cubic_ctrl = Some(c2);
                }
                S::Quadratic { abs, x1, y1, x, y } => {
                    let c = rel(abs, x1, y1);
                    cur = rel(abs, x, y);
                    cmds.push(PathCmd::QuadTo(c, cur));
                    quad_ctrl = Some(c);
                }
                S::SmoothQuadratic { abs, x, y } => {
                    let c = reflect(last_quad_ctrl, cur);
                    cur = rel(abs, x, y);
                    cmds.push(PathCmd::QuadTo(c, cur));
                    quad_ctrl = Some(c);
                }
                S::EllipticalArc { abs, rx, ry, x_axis_rotation, large_arc, sweep, x, y } => {
                    cur = rel(abs, x, y);
                    cmds.push(PathCmd::ArcTo { rx, ry, x_axis_rotation, large_arc, sweep, to: cur });
                }
                S::ClosePath { .. } => {
                    cur = start;
                    cmds.push(PathCmd::Close);
                }
            }
            last_cubic_ctrl = cubic_ctrl;
            last_quad_ctrl = quad_ctrl;
        }
        // A path must start with a moveto; anything else is an error at the
        // first segment, which renders nothing.
        if !matches!(cmds.first(), Some(PathCmd::MoveTo(_))) {
            cmds.clear();
        }
        PathData(cmds)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn map_numbers(&mut self, mut f: impl FnMut(f64) -> f64) {
        let mut p = |pt: &mut Point| {
            pt.x = f(pt.x);
            pt.y = f(pt.y);
        };
        for cmd in &mut self.0 {
            match cmd {
                PathCmd::MoveTo(a) | PathCmd::LineTo(a) => p(a),
                PathCmd::CubicTo(a, b, c) => {
                    p(a);
                    p(b);
                    p(c);
                }
                PathCmd::QuadTo(a, b) => {
                    p(a);
                    p(b);
                }
                PathCmd::ArcTo { to, .. } => p(to),
                PathCmd::Close => {}
            }
        }
        // Radii and rotation share the precision of coordinates.
        for cmd in &mut self.0 {
            if let PathCmd::ArcTo { rx, ry, x_axis_rotation, .. } = cmd {
                let mut q = Point::new(*rx, *ry);
                p(&mut q);
                *rx = q.x;
                *ry = q.y;
                let mut r = Point::new(*x_axis_rotation, 0.0);
                p(&mut r);
                *x_axis_rotation = r.x;
            }
        }
    }
}

fn reflect(ctrl: Option<Point>, about: Point) -> Point {
    match ctrl {
        Some(c) => Point::new(2.0 * about.x - c.x, 2.0 * about.y - c.y),
        None => about,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_and_shorthand_commands_become_absolute() {
        let p = PathData::parse("m1 1 h2 v2 l-1 1 z");
        assert_eq!(
            p.0,
            vec![
                PathCmd::MoveTo(Point::new(1.0, 1.0)),
                PathCmd::LineTo(Point::new(3.0, 1.0)),
                PathCmd::LineTo(Point::new(3.0, 3.0)),
                PathCmd::LineTo(Point::new(2.0, 4.0)),
                PathCmd::Close,
            ]
        );
    }

    #[test]
    fn smooth_cubic_reflects_previous_control() {
        let p = PathData::parse("M0 0 C1 1 2 1 3 0 S5 -1 6 0");
        assert_eq!(p.0[2], PathCmd::CubicTo(Point::new(4.0, -1.0), Point::new(5.0, -1.0), Point::new(6.0, 0.0)));
    }

    #[test]
    fn syntax_error_truncates() {
        let p = PathData::parse("M0 0 L1 1 L2 x");
        assert_eq!(p.0.len(), 2);
        assert!(PathData::parse("L1 1").is_empty());
    }
}
