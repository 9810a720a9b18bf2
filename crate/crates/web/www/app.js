import init, { boundCurve, sdrInterval, simultaneousRegion } from "./pkg/sdr_web.js";

const $ = (id) => document.getElementById(id);

function show(id, f) {
  const out = $(id);
  out.classList.remove("err");
  try {
    return f();
  } catch (e) {
    out.classList.add("err");
    out.textContent = String(e);
    return null;
  }
}

// Draws each series as a polyline; y values of -Infinity are skipped.
function plot(canvas, xs, series) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 40;
  ctx.clearRect(0, 0, w, h);
  const ys = series.flatMap((s) => s.ys).filter(Number.isFinite);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y0 === y1) { y0 -= 1; y1 += 1; }
  const px = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const py = (y) => h - pad - ((y - y0) / (y1 - y0)) * (h - 2 * pad);

  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.fillText(y1.toPrecision(3), 2, pad + 4);
  ctx.fillText(y0.toPrecision(3), 2, h - pad);
  ctx.fillText(x0.toPrecision(3), pad, h - pad + 14);
  ctx.fillText(x1.toPrecision(3), w - pad - 30, h - pad + 14);

  series.forEach((s, n) => {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    let pen = false;
    xs.forEach((x, i) => {
      const y = s.ys[i];
      if (!Number.isFinite(y)) { pen = false; return; }
      pen ? ctx.lineTo(px(x), py(y)) : ctx.moveTo(px(x), py(y));
      pen = true;
    });
    ctx.stroke();
    ctx.fillStyle = s.color;
    ctx.fillText(s.label, w - pad - 140, pad + 14 + 14 * n);
  });
}

const finite = (v) => (v === null ? -Infinity : v);

function runBound() {
  show("b-out", () => {
    const c = JSON.parse(boundCurve($("b-widths").value, Number($("b-mu").value), 60));
    const tight = c.tight.map(finite);
    plot($("b-plot"), c.s, [
      { ys: tight, color: "#1f5fbf", label: "tight log bound" },
      { ys: c.hoeffding, color: "#c0392b", label: "Hoeffding log bound" },
    ]);
    const mid = Math.floor(c.s.length / 2);
    $("b-out").textContent =
      `total ${c.total.toFixed(4)}, mean ${c.mu.toFixed(4)}\n` +
      `at s = ${c.s[mid].toFixed(4)}: tight ${tight[mid].toFixed(5)}, Hoeffding ${c.hoeffding[mid].toFixed(5)}`;
  });
}

function runInterval() {
  show("i-out", () => {
    const r = JSON.parse(sdrInterval($("i-counts").value, $("i-widths").value, Number($("i-alpha").value)));
    $("i-out").textContent =
      `SDP                ${r.sdp.toFixed(5)}\n` +
      `one-sided upper    ${r.upper.toFixed(5)}\n` +
      `Hoeffding upper    ${r.hoeffding_upper.toFixed(5)}\n` +
      `two-sided          [${r.two_sided[0].toFixed(5)}, ${r.two_sided[1].toFixed(5)}]`;
  });
}

function runRegion() {
  show("r-out", () => {
    const r = JSON.parse(simultaneousRegion($("r-counts").value, $("r-widths").value, Number($("r-alpha").value)));
    plot($("r-plot"), r.sizes, [
      { ys: r.sdps, color: "#333", label: "SDP" },
      { ys: r.per_subset, color: "#1f5fbf", label: "per-subset upper" },
      { ys: r.simultaneous, color: "#c0392b", label: "simultaneous upper" },
    ]);
    $("r-out").textContent = r.sizes
      .map((n, k) => `${String(n).padStart(6)}  ${r.sdps[k].toFixed(4)}  ${r.per_subset[k].toFixed(4)}  ${r.simultaneous[k].toFixed(4)}`)
      .join("\n");
  });
}

function randomWidths() {
  $("b-widths").value = Array.from({ length: 50 }, () => (-Math.log(Math.random())).toFixed(3)).join(",");
  runBound();
}

await init();
$("b-run").onclick = runBound;
$("b-random").onclick = randomWidths;
$("i-run").onclick = runInterval;
$("r-run").onclick = runRegion;
runBound();
runInterval();
runRegion();
