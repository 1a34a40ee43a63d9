func CountMatches(lines []string, pattern string) int64 {
	var total int64
	var wg sync.WaitGroup
	for _, line := range lines {
		wg.Add(1)
		go func(line string) {
			defer wg.Done()
			if strings.Contains(line, pattern) {
				total++
			}
		}(line)
	}
	wg.Wait()
	return total
}
