import { mkdtempSync, readFileSync } from 'fs'
import { tmpdir } from 'os'
import { join } from 'path'
import { describe, expect, it } from 'vitest'

import { buildChart, interferenceBars } from '../src/chart.js'
import { CsvError, MissingMetricError, loadMetricsCsv, metricValue, parseMetricsCsv } from '../src/csv.js'
import { plot } from '../src/plot.js'
import { renderSvg } from '../src/svg.js'

const FIXTURES = join(__dirname, '..', 'fixtures')
const fig7a = () => loadMetricsCsv(join(FIXTURES, 'fig7a.csv'))
const fig7b = () => loadMetricsCsv(join(FIXTURES, 'fig7b.csv'))
const amr = () => loadMetricsCsv(join(FIXTURES, 'amr-faults.csv'))
const tsub = () => loadMetricsCsv(join(FIXTURES, 'tsu-bound.csv'))

describe('csv parsing', () => {
  it('parses the shipped fixtures', () => {
    const rows = fig7a()
    expect(rows.length).toBeGreaterThan(100)
    expect(rows[0].scenario).toBe('fig7a')
    expect(new Set(rows.map((r) => r.variant))).toContain('regulated_partitioned')
  })

  it('rejects an empty CSV with an error', () => {
    expect(() => parseMetricsCsv('')).toThrow(CsvError)
  })

  it('rejects a wrong header and ragged rows', () => {
    expect(() => parseMetricsCsv('a,b,c\n1,2,3\n')).toThrow(/bad header/)
    expect(() => parseMetricsCsv('scenario,variant,subject,metric,value,unit\nx,y\n')).toThrow(
      /expected 6 fields/,
    )
    expect(() =>
      parseMetricsCsv('scenario,variant,subject,metric,value,unit\na,b,c,d,notanumber,u\n'),
    ).toThrow(/non-numeric/)
  })

  it('names the metric and variant when a lookup misses', () => {
    const rows = fig7a()
    try {
      metricValue(rows, 'unregulated', 'task:host', 'no_such_metric')
      expect.unreachable()
    } catch (err) {
      expect(err).toBeInstanceOf(MissingMetricError)
      expect(String((err as Error).message)).toContain('no_such_metric')
      expect(String((err as Error).message)).toContain('unregulated')
    }
  })
})

describe('chart shaping', () => {
  it('interference bars normalize the isolated variant to 1.0', () => {
    const model = interferenceBars(fig7a())
    const host = model.groups.find((g) => g.title === 'host')!
    const isolated = host.bars.find((b) => b.label === 'isolated')!
    expect(isolated.value).toBe(1)
    const unregulated = host.bars.find((b) => b.label === 'unregulated')!
    expect(unregulated.value).toBeGreaterThan(20)
  })

  it('fig7b aliased variant sits exactly at 1.0 for both tasks', () => {
    const model = interferenceBars(fig7b())
    for (const group of model.groups) {
      const aliased = group.bars.find((b) => b.label === 'aliased_partitioned')!
      expect(aliased.value).toBe(1)
    }
  })

  it('amr-modes carries recovery annotations', () => {
    const model = buildChart('amr-modes', amr(), 'ratio-to-isolated')
    const withFaults = model.groups[0].bars.find((b) => b.label === 'dlm-faults')!
    expect(withFaults.annotation).toMatch(/3 detected \/ 3 recovered/)
    const clean = model.groups[0].bars.find((b) => b.label === 'mode-indip')!
    expect(clean.annotation).toBeUndefined()
  })

  it('bound-vs-measured pairs the analytic bound with the observed max', () => {
    const model = buildChart('bound-vs-measured', tsub(), 'absolute')
    expect(model.groups.length).toBeGreaterThan(0)
    for (const g of model.groups) {
      const bound = g.bars.find((b) => b.label === 'bound')!
      const measured = g.bars.find((b) => b.label === 'measured max')!
      expect(bound.value).toBeGreaterThanOrEqual(measured.value)
    }
  })

  it('fails with a named error when the baseline metric is absent', () => {
    const rows = fig7a().filter((r) => r.variant !== 'isolated')
    expect(() => interferenceBars(rows)).toThrow(MissingMetricError)
  })
})

describe('rendering', () => {
  it('is a pure function of the CSV: identical input, identical bytes', () => {
    const a = renderSvg(buildChart('interference-bars', fig7a(), 'ratio-to-isolated'))
    const b = renderSvg(buildChart('interference-bars', fig7a(), 'ratio-to-isolated'))
    expect(a).toBe(b)
    expect(a.startsWith('<svg')).toBe(true)
    expect(a).toContain('ratio to isolated')
  })

  it('regenerates both interference charts from the shipped CSVs', () => {
    const dir = mkdtempSync(join(tmpdir(), 'plotkit-'))
    for (const name of ['fig7a', 'fig7b']) {
      const out = join(dir, `${name}.svg`)
      plot({ kind: 'interference-bars', input: join(FIXTURES, `${name}.csv`), output: out })
      const svg1 = readFileSync(out, 'utf-8')
      plot({ kind: 'interference-bars', input: join(FIXTURES, `${name}.csv`), output: out })
      expect(readFileSync(out, 'utf-8')).toBe(svg1)
      expect(svg1).toContain('</svg>')
    }
  })

  it('absolute normalization keeps raw cycle counts', () => {
    const model = buildChart('interference-bars', fig7b(), 'absolute')
    const amrGroup = model.groups.find((g) => g.title === 'amr')!
    const iso = amrGroup.bars.find((b) => b.label === 'isolated')!
    expect(iso.value).toBeGreaterThan(1000)
  })
})
