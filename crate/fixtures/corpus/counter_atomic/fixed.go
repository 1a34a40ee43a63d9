func CountMatches(lines []string, pattern string) int64 {
	var total int64
	var wg sync.WaitGroup
	for _, line := range lines {
		wg.Add(1)
		go func(line string) {
			defer wg.Done()
			if strings.Contains(line, pattern) {
				atomic.AddInt64(&total, 1)
			}
		}(line)
	}
	wg.Wait()
	return atomic.LoadInt64(&total)
}
