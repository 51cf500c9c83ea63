//! Minimal deterministic SVG emitter. Coordinates are formatted with a
//! fixed number of decimals so identical figure data always serializes to
//! byte-identical markup.

/// Two decimals is plenty at figure scale and keeps output stable.
pub fn fmt(v: f64) -> String {
    // Avoid the "-0.00" artifact that f64 rounding can produce.
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

pub fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(ch),
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub enum TextAnchor {
    Start,
    Middle,
    End,
}

impl TextAnchor {
    fn as_str(self) -> &'static str {
        match self {
            TextAnchor::Start => "start",
            TextAnchor::Middle => "middle",
            TextAnchor::End => "end",
        }
    }
}

pub struct Svg {
    width: f64,
    height: f64,
    body: String,
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Svg {
        Svg {
            width,
            height,
            body: String::new(),
        }
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        self.body.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
            fmt(x),
            fmt(y),
            fmt(w),
            fmt(h),
            fill
        ));
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        self.body.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"{}\"/>\n",
            fmt(x1),
            fmt(y1),
            fmt(x2),
            fmt(y2),
            stroke,
            fmt(width)
        ));
    }

    pub fn dashed_line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        self.body.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"{}\" stroke-dasharray=\"4 3\"/>\n",
            fmt(x1),
            fmt(y1),
            fmt(x2),
            fmt(y2),
            stroke,
            fmt(width)
        ));
    }

    pub fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str) {
        self.body.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\"/>\n",
            fmt(cx),
            fmt(cy),
            fmt(r),
            fill
        ));
    }

    /// Closed filled polygon.
    pub fn polygon(&mut self, points: &[(f64, f64)], fill: &str, stroke: &str) {
        let pts: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt(x), fmt(y)))
            .collect();
        self.body.push_str(&format!(
            "<polygon points=\"{}\" fill=\"{}\" stroke=\"{}\" stroke-width=\"0.50\"/>\n",
            pts.join(" "),
            fill,
            stroke
        ));
    }

    /// Open polyline.
    pub fn polyline(&mut self, points: &[(f64, f64)], stroke: &str, width: f64) {
        let pts: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt(x), fmt(y)))
            .collect();
        self.body.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"/>\n",
            pts.join(" "),
            stroke,
            fmt(width)
        ));
    }

    pub fn text(&mut self, x: f64, y: f64, size: f64, anchor: TextAnchor, content: &str) {
        self.body.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"{}\" font-family=\"monospace\" text-anchor=\"{}\" fill=\"#222222\">{}</text>\n",
            fmt(x),
            fmt(y),
            fmt(size),
            anchor.as_str(),
            escape_text(content)
        ));
    }

    /// Text rotated 90 degrees counterclockwise about its own anchor point.
    pub fn vtext(&mut self, x: f64, y: f64, size: f64, anchor: TextAnchor, content: &str) {
        self.body.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"{}\" font-family=\"monospace\" text-anchor=\"{}\" fill=\"#222222\" transform=\"rotate(-90 {} {})\">{}</text>\n",
            fmt(x),
            fmt(y),
            fmt(size),
            anchor.as_str(),
            fmt(x),
            fmt(y),
            escape_text(content)
        ));
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n{}</svg>\n",
            fmt(self.width),
            fmt(self.height),
            fmt(self.width),
            fmt(self.height),
            fmt(self.width),
            fmt(self.height),
            self.body
        )
    }
}

/// Fill used for cells that carry no value.
pub const EMPTY_FILL: &str = "#bdbdbd";

fn hex(r: f64, g: f64, b: f64) -> String {
    let clamp = |v: f64| v.round().clamp(0.0, 255.0) as u8;
    format!("#{:02x}{:02x}{:02x}", clamp(r), clamp(g), clamp(b))
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Light-to-dark blue ramp for probabilities in [0, 1].
pub fn sequential_color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    // White-blue (247,251,255) through mid blue (66,146,198) to dark (8,48,107).
    if t < 0.5 {
        let u = t / 0.5;
        hex(
            lerp(247.0, 66.0, u),
            lerp(251.0, 146.0, u),
            lerp(255.0, 198.0, u),
        )
    } else {
        let u = (t - 0.5) / 0.5;
        hex(
            lerp(66.0, 8.0, u),
            lerp(146.0, 48.0, u),
            lerp(198.0, 107.0, u),
        )
    }
}

/// Blue-white-red ramp for signed values in [-1, 1].
pub fn diverging_color(t: f64) -> String {
    let t = t.clamp(-1.0, 1.0);
    if t < 0.0 {
        let u = t + 1.0; // [-1,0] -> [0,1]
        hex(
            lerp(33.0, 247.0, u),
            lerp(102.0, 247.0, u),
            lerp(172.0, 247.0, u),
        )
    } else {
        hex(
            lerp(247.0, 178.0, t),
            lerp(247.0, 24.0, t),
            lerp(247.0, 43.0, t),
        )
    }
}
