/** Hand-built SVG bar charts; output depends only on the input data, so
 * repeated renders are byte-identical. */

export interface Bar {
  label: string;
  value: number;
  color: string;
  cssClass: string;
}

const WIDTH = 860;
const HEIGHT = 480;
const MARGIN = { top: 48, right: 24, bottom: 110, left: 72 };

function esc(s: string): string {
  return s
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

function fmt(v: number): string {
  return v.toFixed(2);
}

/** Nice-ish axis maximum: smallest multiple of a power-of-ten step above
 * the data maximum (deterministic). */
function axisMax(maxValue: number): number {
  if (maxValue <= 0) return 1;
  const raw = maxValue * 1.05;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  for (const mult of [1, 2, 2.5, 5, 10]) {
    if (mult * mag >= raw) return mult * mag;
  }
  return 10 * mag;
}

export function renderBarChart(
  title: string,
  yLabel: string,
  bars: Bar[],
): string {
  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const yMax = axisMax(Math.max(...bars.map((b) => b.value)));
  const slot = plotW / bars.length;
  const barW = Math.min(56, slot * 0.72);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="#ffffff"/>`);
  parts.push(
    `<text x="${WIDTH / 2}" y="28" text-anchor="middle" font-family="sans-serif" font-size="17" font-weight="bold">${esc(title)}</text>`,
  );

  // y axis with 5 gridlines
  for (let i = 0; i <= 5; i++) {
    const frac = i / 5;
    const y = MARGIN.top + plotH * (1 - frac);
    const value = yMax * frac;
    parts.push(
      `<line x1="${MARGIN.left}" y1="${fmt(y)}" x2="${WIDTH - MARGIN.right}" y2="${fmt(y)}" stroke="#dddddd" stroke-width="1"/>`,
    );
    parts.push(
      `<text x="${MARGIN.left - 8}" y="${fmt(y + 4)}" text-anchor="end" font-family="sans-serif" font-size="11">${fmt(value)}</text>`,
    );
  }
  parts.push(
    `<text x="18" y="${MARGIN.top + plotH / 2}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 ${MARGIN.top + plotH / 2})">${esc(yLabel)}</text>`,
  );

  bars.forEach((bar, i) => {
    const x = MARGIN.left + slot * i + (slot - barW) / 2;
    const h = yMax > 0 ? (bar.value / yMax) * plotH : 0;
    const y = MARGIN.top + plotH - h;
    parts.push(
      `<rect class="${esc(bar.cssClass)}" x="${fmt(x)}" y="${fmt(y)}" width="${fmt(barW)}" height="${fmt(h)}" fill="${bar.color}"/>`,
    );
    parts.push(
      `<text x="${fmt(x + barW / 2)}" y="${fmt(y - 5)}" text-anchor="middle" font-family="sans-serif" font-size="10">${fmt(bar.value)}</text>`,
    );
    const lx = MARGIN.left + slot * i + slot / 2;
    const ly = MARGIN.top + plotH + 14;
    parts.push(
      `<text x="${fmt(lx)}" y="${fmt(ly)}" text-anchor="end" font-family="sans-serif" font-size="10" transform="rotate(-45 ${fmt(lx)} ${fmt(ly)})">${esc(bar.label)}</text>`,
    );
  });

  parts.push(
    `<line x1="${MARGIN.left}" y1="${MARGIN.top + plotH}" x2="${WIDTH - MARGIN.right}" y2="${MARGIN.top + plotH}" stroke="#333333" stroke-width="1"/>`,
  );
  parts.push('</svg>');
  return parts.join('\n') + '\n';
}
