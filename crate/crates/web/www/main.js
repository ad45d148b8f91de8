import init, { closure, default_program, GeoModel } from "./pkg/tensor_logic_web.js";

const $ = (id) => document.getElementById(id);
let geo = null;

function escape(s) {
  return String(s).replace(/[&<>"]/g, (c) => ({ "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;" })[c]);
}

function check(name, c) {
  const cls = c.passed ? "ok" : "bad";
  return `<span class="${cls}">${name}: ${c.passed ? "pass" : `fail (${c.violations})`}</span>`;
}

function runClosure() {
  const out = $("closure-out");
  try {
    const r = JSON.parse(closure($("edges").value, $("program").value, $("engine").value, $("focus").value));
    const v = r.verification;
    let html = `<p>${r.nodes} nodes, ${r.base_edges} base edges, ${r.closure_edges} derived.
      New edges per iteration: [${r.trace.new_edges.join(", ")}].</p>
      <p>${check("containment", v.containment)} · ${check("closure", v.closure)} · ${check("acyclicity", v.acyclicity)}</p>`;
    if (r.focus) {
      html += `<p><b>${escape(r.focus.person)}</b> ancestors: ${escape(r.focus.ancestors.join(", ") || "none")};
        descendants: ${escape(r.focus.descendants.join(", ") || "none")}</p>`;
    }
    html += `<pre>${r.pairs.map((p) => escape(p.join(" → "))).join("\n")}${r.truncated ? "\n…" : ""}</pre>`;
    out.innerHTML = html;
  } catch (e) {
    out.innerHTML = `<p class="bad">${escape(e)}</p>`;
  }
}

function drawCurve(curve) {
  const cv = $("curve");
  const ctx = cv.getContext("2d");
  ctx.clearRect(0, 0, cv.width, cv.height);
  if (curve.length < 2) return;
  const logs = curve.map((l) => Math.log10(Math.max(l, 1e-6)));
  const hi = Math.max(...logs), lo = Math.min(...logs);
  const y = (v) => cv.height - 10 - ((v - lo) / (hi - lo || 1)) * (cv.height - 20);
  ctx.beginPath();
  logs.forEach((v, i) => {
    const x = 10 + (i / (logs.length - 1)) * (cv.width - 20);
    i ? ctx.lineTo(x, y(v)) : ctx.moveTo(x, y(v));
  });
  ctx.strokeStyle = "#36c";
  ctx.stroke();
  ctx.fillStyle = "#555";
  ctx.fillText(`loss ${curve[0].toFixed(3)} → ${curve[curve.length - 1].toFixed(4)} (log scale)`, 14, 14);
}

function train() {
  const out = $("geo-out");
  out.textContent = "training…";
  // let the status paint before the blocking call
  setTimeout(() => {
    try {
      if (geo) geo.free();
      geo = new GeoModel(+$("epochs").value, +$("dim").value, +$("lr").value, +$("seed").value, $("init-only").checked);
      const r = JSON.parse(geo.report());
      drawCurve(r.loss_curve);
      const rows = r.queries
        .map((q) => `<tr><td>${escape(q.subject)}</td><td>${escape(q.expected)}</td>
          <td class="${q.correct ? "ok" : "bad"}">${escape(q.predicted)}</td></tr>`)
        .join("");
      out.innerHTML = `<p>${r.facts} facts, ${r.entities} entities. Zero-shot: ${r.correct}/${r.queries.length}</p>
        <table><tr><th>city</th><th>expected</th><th>predicted</th></tr>${rows}</table>`;
      $("entity-list").innerHTML = JSON.parse(geo.entities()).map((e) => `<option value="${escape(e)}">`).join("");
      $("query").disabled = false;
    } catch (e) {
      out.innerHTML = `<p class="bad">${escape(e)}</p>`;
    }
  }, 20);
}

function query() {
  const out = $("query-out");
  try {
    const top = JSON.parse(geo.query($("subject").value, $("chain").value, +$("topk").value));
    out.innerHTML = `<table><tr><th>entity</th><th>score</th></tr>${top
      .map((t) => `<tr><td>${escape(t.entity)}</td><td>${t.score.toFixed(3)}</td></tr>`)
      .join("")}</table>`;
  } catch (e) {
    out.innerHTML = `<p class="bad">${escape(e)}</p>`;
  }
}

await init();
$("status").textContent = "";
$("program").value = default_program();
$("run-closure").onclick = runClosure;
$("train").onclick = train;
$("query").onclick = query;
runClosure();
