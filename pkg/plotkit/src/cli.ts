#!/usr/bin/env node
/**
 * plotkit <kind> <metrics.csv> -o <out.svg> [--absolute] [--metric NAME]
 *
 * kinds: interference-bars | amr-modes | bound-vs-measured
 */

import { plot } from './plot.js'
import { ChartKind } from './chart.js'

const KINDS: ChartKind[] = ['interference-bars', 'amr-modes', 'bound-vs-measured']

function usage(): never {
  console.error('usage: plotkit <kind> <metrics.csv> -o <out.svg> [--absolute] [--metric NAME]')
  console.error(`kinds: ${KINDS.join(' | ')}`)
  process.exit(2)
}

function main(argv: string[]): number {
  const args = [...argv]
  const positional: string[] = []
  let output = ''
  let absolute = false
  let metric: string | undefined
  while (args.length > 0) {
    const a = args.shift()!
    if (a === '-o' || a === '--output') output = args.shift() ?? ''
    else if (a === '--absolute') absolute = true
    else if (a === '--metric') metric = args.shift()
    else if (a.startsWith('-')) usage()
    else positional.push(a)
  }
  if (positional.length !== 2 || output === '') usage()
  const [kind, input] = positional
  if (!KINDS.includes(kind as ChartKind)) usage()
  try {
    const written = plot({
      kind: kind as ChartKind,
      input,
      output,
      normalization: absolute ? 'absolute' : 'ratio-to-isolated',
      metric,
    })
    console.log(`wrote ${written}`)
    return 0
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err))
    return 1
  }
}

process.exit(main(process.argv.slice(2)))
