func (c *Cache) Fill(keys []string) {
	var wg sync.WaitGroup
	for _, k := range keys {
		wg.Add(1)
		go func(k string) {
			defer wg.Done()
			c.items[k] = c.load(k)
		}(k)
	}
	wg.Wait()
}
