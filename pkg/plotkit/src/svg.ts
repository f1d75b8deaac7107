/**
 * Deterministic SVG renderer for grouped bar charts.
 *
 * No timestamps, no randomness, fixed ordering and fixed number
 * formatting: the same ChartModel always serializes to the same bytes.
 * Values can span orders of magnitude (1x .. 100x interference ratios),
 * so bars use a log scale once the spread exceeds a decade.
 */

import { BarGroup, ChartModel } from './chart.js'

const BAR_W = 34
const BAR_GAP = 8
const GROUP_GAP = 46
const PLOT_H = 260
const MARGIN = { top: 56, right: 24, bottom: 96, left: 72 }

const PALETTE = ['#4878a8', '#e49444', '#d1605e', '#85b6b2', '#6a9f58', '#967662']

function fmt(v: number): string {
  if (!Number.isFinite(v)) return '0'
  if (Number.isInteger(v) && Math.abs(v) < 1e15) return String(v)
  return v.toPrecision(6).replace(/\.?0+$/, '')
}

function esc(s: string): string {
  return s.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;').replace(/"/g, '&quot;')
}

interface Scale {
  toY(v: number): number
  ticks: number[]
  log: boolean
}

function makeScale(maxValue: number): Scale {
  const max = Math.max(maxValue, 1e-9)
  if (max > 50) {
    // log scale from 1 upward
    const top = Math.pow(10, Math.ceil(Math.log10(max)))
    const ticks: number[] = []
    for (let t = 1; t <= top; t *= 10) ticks.push(t)
    return {
      log: true,
      ticks,
      toY: (v) => PLOT_H - (Math.log10(Math.max(v, 1)) / Math.log10(top)) * PLOT_H,
    }
  }
  const step = max <= 2 ? 0.5 : max <= 5 ? 1 : max <= 12 ? 2 : max <= 30 ? 5 : 10
  const top = Math.ceil(max / step) * step
  const ticks: number[] = []
  for (let t = 0; t <= top + 1e-9; t += step) ticks.push(Number(t.toFixed(6)))
  return { log: false, ticks, toY: (v) => PLOT_H - (v / top) * PLOT_H }
}

function groupWidth(g: BarGroup): number {
  return g.bars.length * BAR_W + (g.bars.length - 1) * BAR_GAP
}

export function renderSvg(model: ChartModel): string {
  const maxValue = Math.max(...model.groups.flatMap((g) => g.bars.map((b) => b.value)))
  const scale = makeScale(maxValue)
  const plotW =
    model.groups.reduce((acc, g) => acc + groupWidth(g), 0) +
    GROUP_GAP * (model.groups.length + 1)
  const width = MARGIN.left + plotW + MARGIN.right
  const height = MARGIN.top + PLOT_H + MARGIN.bottom

  const out: string[] = []
  out.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="sans-serif">`,
  )
  out.push(`<rect width="${width}" height="${height}" fill="white"/>`)
  out.push(
    `<text x="${MARGIN.left}" y="28" font-size="15" font-weight="bold">${esc(model.title)}</text>`,
  )
  // axis + gridlines
  for (const t of scale.ticks) {
    const y = MARGIN.top + scale.toY(t)
    out.push(
      `<line x1="${MARGIN.left}" y1="${fmt(y)}" x2="${width - MARGIN.right}" y2="${fmt(y)}" ` +
        `stroke="#dddddd" stroke-width="1"/>`,
    )
    out.push(
      `<text x="${MARGIN.left - 6}" y="${fmt(y + 4)}" font-size="10" text-anchor="end">${fmt(t)}</text>`,
    )
  }
  out.push(
    `<text x="14" y="${MARGIN.top + PLOT_H / 2}" font-size="11" text-anchor="middle" ` +
      `transform="rotate(-90 14 ${MARGIN.top + PLOT_H / 2})">${esc(model.valueAxis)}</text>`,
  )
  // bars
  let x = MARGIN.left + GROUP_GAP
  for (const group of model.groups) {
    let bx = x
    group.bars.forEach((bar, i) => {
      const y = MARGIN.top + scale.toY(bar.value)
      const h = MARGIN.top + PLOT_H - y
      const color = PALETTE[i % PALETTE.length]
      out.push(
        `<rect x="${fmt(bx)}" y="${fmt(y)}" width="${BAR_W}" height="${fmt(Math.max(h, 0.5))}" ` +
          `fill="${color}"/>`,
      )
      out.push(
        `<text x="${fmt(bx + BAR_W / 2)}" y="${fmt(y - 4)}" font-size="9" ` +
          `text-anchor="middle">${fmt(bar.value)}</text>`,
      )
      out.push(
        `<text x="${fmt(bx + BAR_W / 2)}" y="${MARGIN.top + PLOT_H + 12}" font-size="9" ` +
          `text-anchor="middle" transform="rotate(30 ${fmt(bx + BAR_W / 2)} ` +
          `${MARGIN.top + PLOT_H + 12})">${esc(bar.label)}</text>`,
      )
      if (bar.annotation !== undefined) {
        out.push(
          `<text x="${fmt(bx + BAR_W / 2)}" y="${fmt(y - 16)}" font-size="8" fill="#a33" ` +
            `text-anchor="middle">${esc(bar.annotation)}</text>`,
        )
      }
      bx += BAR_W + BAR_GAP
    })
    out.push(
      `<text x="${fmt(x + groupWidth(group) / 2)}" y="${MARGIN.top + PLOT_H + 54}" ` +
        `font-size="11" font-weight="bold" text-anchor="middle">${esc(group.title)}</text>`,
    )
    x += groupWidth(group) + GROUP_GAP
  }
  out.push(
    `<line x1="${MARGIN.left}" y1="${MARGIN.top + PLOT_H}" x2="${width - MARGIN.right}" ` +
      `y2="${MARGIN.top + PLOT_H}" stroke="#333333" stroke-width="1"/>`,
  )
  out.push('</svg>')
  return out.join('\n') + '\n'
}
